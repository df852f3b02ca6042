#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "morseflow/morse.hpp"

namespace morseflow {

/// Step-size underflow or a non-finite state; carries the last accepted state.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, ManifoldPoint last, double t)
      : Error(what), last_state(std::move(last)), last_time(t) {}
  ManifoldPoint last_state;
  double last_time;
};

/// A flow map was requested through a point whose trajectory converges to a
/// critical point before reaching the target level.
class UndefinedFlowMapError : public Error {
 public:
  UndefinedFlowMapError(const std::string& what, int critical) : Error(what), critical_id(critical) {}
  int critical_id;
};

struct IntegratorOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  double max_time = 500.0;
  double convergence_radius = 1e-5;
  double initial_step = 1e-3;
  long max_steps = 2'000'000;
};

enum class StopReason { converged, reached_level, reached_time, event, left_domain, max_time };

std::string_view to_string(StopReason r);

/// Which conditions end an integration. Checks run after every accepted step;
/// the level, time and event stops are located exactly inside the step.
struct StopCondition {
  /// Stop when f crosses this value (from above for direction +1).
  std::optional<double> level;
  /// Stop at this elapsed time.
  std::optional<double> time;
  /// Stop when event(x) changes sign from positive to non-positive.
  std::function<double(const ManifoldPoint&)> event;
  /// Stop once ||grad f|| < 1e-8 (and within the convergence radius of a
  /// listed critical point when a list is given).
  bool converge = true;

  static StopCondition at_level(double a) {
    StopCondition s;
    s.level = a;
    return s;
  }
  static StopCondition at_time(double t) {
    StopCondition s;
    s.time = t;
    s.converge = false;
    return s;
  }
};

struct TrajectorySample {
  double t = 0.0;
  /// Periodic coordinates are not reduced, so winding can be read off.
  ManifoldPoint x;
  double f = 0.0;
};

/// Integrated trajectory with dense output. direction = +1 follows -grad f.
class Trajectory {
 public:
  std::vector<TrajectorySample> samples;
  StopReason status = StopReason::max_time;
  /// Set when status == converged and the limit matched a listed critical point.
  std::optional<int> critical;
  /// Integral of ||grad f||^2 dt.
  double energy = 0.0;
  int direction = 1;
  /// Variational solution mapping start-chart tangent vectors to end-chart ones.
  Mat derivative;

  double start_time() const { return samples.front().t; }
  double end_time() const { return samples.back().t; }
  const ManifoldPoint& start() const { return samples.front().x; }
  const ManifoldPoint& end() const { return samples.back().x; }
  /// Dense-output state at time t in [start_time, end_time].
  ManifoldPoint state_at(double t) const;
  /// Uniformly refined points: every step subdivided into `per_step` pieces.
  std::vector<TrajectorySample> refined(int per_step) const;

  struct Step {
    int chart = 0;
    double t0 = 0.0;
    double h = 0.0;
    /// Hairer dense coefficients for the base state only.
    Vec r1, r2, r3, r4, r5;
  };
  std::vector<Step> steps;
};

/// Integrate the flow of -direction * grad f from x.
/// With with_derivative the variational equation is integrated alongside.
Trajectory integrate(const MorseSystem& sys, const ManifoldPoint& x, const StopCondition& stop,
                     const IntegratorOptions& opts = {}, const std::vector<CriticalPoint>* critical = nullptr,
                     int direction = 1, bool with_derivative = false);

struct FlowMapResult {
  ManifoldPoint image;
  /// Level-restricted derivative (I - V df / df(V)) Phi, image chart coordinates.
  Mat derivative;
  /// Raw variational solution Phi.
  Mat variational;
  double time = 0.0;
  Trajectory trajectory;
};

/// psi: f^{-1}(b) -> f^{-1}(a); backward flow when a > b.
FlowMapResult flow_map(const MorseSystem& sys, const ManifoldPoint& x, double b, double a,
                       const IntegratorOptions& opts = {}, const std::vector<CriticalPoint>* critical = nullptr);

enum class OmegaStatus { converged, left_domain, inconclusive };

struct OmegaLimit {
  OmegaStatus status = OmegaStatus::inconclusive;
  std::optional<int> critical;
  Trajectory trajectory;
};

OmegaLimit omega_limit(const MorseSystem& sys, const ManifoldPoint& x, const std::vector<CriticalPoint>& critical,
                       const IntegratorOptions& opts = {}, int direction = 1);

struct DwellRecord {
  int critical = 0;
  double entry_time = 0.0;
  double exit_time = 0.0;
  double closest_distance = 0.0;
  double dwell_time() const { return exit_time - entry_time; }
};

struct BrokenDecomposition {
  std::vector<DwellRecord> dwells;
  /// Visited critical points in order, ending with the limit when converged.
  std::vector<int> skeleton;
};

/// Maximal time intervals spent inside the rho-ball of each critical point.
/// Throws ConfigurationError when two balls overlap.
BrokenDecomposition decompose_to_broken(const MorseSystem& sys, const Trajectory& traj,
                                        const std::vector<CriticalPoint>& critical, double rho);

/// CSV with columns t, chart, x0, x1, ...
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, int per_step = 4);

}  // namespace morseflow
