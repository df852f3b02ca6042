#pragma once

#include <map>
#include <optional>
#include <vector>

#include "morseflow/flow.hpp"

namespace morseflow {

/// Basin-boundary bisection could not isolate an orbit.
class UnresolvedOrbitError : public Error {
 public:
  UnresolvedOrbitError(const std::string& what, double lo, double hi) : Error(what), lower(lo), upper(hi) {}
  double lower, upper;
};

/// Transversality failure detected while evaluating an orientation sign.
class DegenerateIntersectionError : public Error {
 public:
  using Error::Error;
};

struct ModuliOptions {
  /// Launch offset from p along the unit sphere of V-.
  double launch_radius = 1e-4;
  /// Directions on the descending circle used to classify basins.
  int mesh = 64;
  double bisect_tol = 1e-10;
  /// Sign level sits this fraction of f(p) - f(q) above f(q).
  double sign_level_fraction = 0.02;
  /// Parameter step of moduli curve polylines.
  double curve_step = 1e-2;
  /// Launch offset inside a moduli curve component for the endpoint shadowing check.
  double endpoint_offset = 1e-6;
  double degenerate_tol = 1e-8;
  IntegratorOptions flow;
};

struct SphereSample {
  /// Angle on the circle of V- (index 2), or +-1 (index 1).
  double parameter = 0.0;
  /// Unit launch direction in chart coordinates (G-unit).
  Vec direction;
  bool reached = false;
  ManifoldPoint image;
  double time = 0.0;
};

/// S_p^- (or S_q^+) sampled by launching from the critical point and flowing to a level.
struct SphereSampling {
  int critical = 0;
  double level = 0.0;
  bool ascending = false;
  std::vector<SphereSample> points;
  /// Minimum pairwise distance among reached images (injectivity check).
  double min_pairwise_distance = 0.0;
  int gaps() const;
};

struct FlowLineClass {
  int source = 0;
  int target = 0;
  /// Launch parameter on the descending sphere of the source.
  double parameter = 0.0;
  double level = 0.0;
  ManifoldPoint representative;
  /// Winding of the lifted trajectory (periodic coordinates only).
  std::vector<int> winding;
  /// +1 / -1, or 0 while unset.
  int sign = 0;
};

struct EndpointRecord {
  double parameter = 0.0;
  /// Intermediate critical point r of the broken limit (p -> r -> q); -1 if none found.
  int intermediate = -1;
  /// Indices into connecting_orbits(p, r) and connecting_orbits(r, q).
  int class_pr = -1;
  int class_rq = -1;
  /// +1 where the component ends (increasing parameter), -1 where it starts.
  int boundary_sign = 0;
  int product_sign = 0;
  /// (-1)^(ind p - ind r) * product_sign.
  int weighted = 0;
  /// Trajectory started endpoint_offset inside the component dwells at r.
  bool shadowing_ok = false;
  /// Parameter offset at which the shadowing trajectory entered the dwell ball.
  double offset_used = 0.0;
  double dwell_time = 0.0;
};

struct CurveComponent {
  double parameter_begin = 0.0;
  double parameter_end = 0.0;
  std::vector<int> winding;
  std::vector<ManifoldPoint> polyline;
  std::vector<EndpointRecord> endpoints;
  int weighted_sum() const;
  /// boundary_sign * weighted has the same value at every endpoint, i.e. the
  /// parameter orientation is (plus or minus) the induced boundary orientation.
  bool boundary_orientation_consistent() const;
};

struct ModuliCurve {
  int source = 0;
  int target = 0;
  double level = 0.0;
  std::vector<CurveComponent> components;
  int weighted_endpoint_sum() const;
  int endpoint_count() const;
};

/// Orbit-level computations on one Morse system. Results are cached per
/// critical point and per pair; not safe for concurrent use of one instance.
class ModuliSolver {
 public:
  ModuliSolver(const MorseSystem& sys, std::vector<CriticalPoint> critical, ModuliOptions opts = {});

  const std::vector<CriticalPoint>& critical() const { return crit_; }
  const CriticalPoint& point(int id) const;
  const ModuliOptions& options() const { return opts_; }

  SphereSampling descending_sphere(int p, double a, int mesh = 0) const;
  SphereSampling ascending_sphere(int q, double a, int mesh = 0) const;

  /// Classes of M(p, q) for ind p - ind q = 1, signed, sorted by representative.
  const std::vector<FlowLineClass>& connecting_orbits(int p, int q);
  /// Orientation sign of a class evaluated on level f(q) + level_offset.
  int orientation_sign(const FlowLineClass& c, std::optional<double> level_offset = std::nullopt) const;
  int signed_count(int p, int q);
  /// One-dimensional M(p, q) for ind p - ind q = 2 (ind p = 2 only), cached.
  const ModuliCurve& moduli_curve(int p, int q);

  /// Midpoint between f(p) and the next critical value below it.
  double level_below(int p) const;
  /// Midpoint between f(q) and the next critical value above it.
  double level_above(int q) const;

 private:
  struct Key {
    int critical = -1;
    std::vector<int> winding;
    bool operator==(const Key&) const = default;
  };
  struct Boundary {
    double lo = 0.0, hi = 0.0;  // bracketing parameters, key(lo) = left key
    Key left, right;
    int saddle = -1;
    double dwell_time = 0.0;
  };
  struct DescendingAnalysis {
    std::vector<double> mesh;
    std::vector<Key> keys;
    std::vector<Boundary> boundaries;
    // Index-1 source: the two directions +O0, -O0.
    std::vector<Key> ends;
  };

  Vec launch_direction(int p, double parameter) const;
  ManifoldPoint launch_point(int p, double parameter) const;
  Key classify(int p, double parameter) const;
  std::vector<int> winding_of(const ManifoldPoint& end_unwrapped, int critical) const;
  const DescendingAnalysis& analysis(int p);
  double dwell_radius() const;
  void check_level(double a) const;
  SphereSampling sample_sphere(int c, double a, int mesh, int direction) const;
  ModuliCurve compute_curve(int p, int q);

  const MorseSystem& sys_;
  std::vector<CriticalPoint> crit_;
  ModuliOptions opts_;
  std::map<int, DescendingAnalysis> analysis_;
  std::map<std::pair<int, int>, std::vector<FlowLineClass>> classes_;
  std::map<std::pair<int, int>, ModuliCurve> curves_;
};

}  // namespace morseflow
