// Dormand-Prince 5(4) with Hairer's continuous extension, FSAL, and the
// variational equation carried in the same state vector.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "morseflow/flow.hpp"

namespace morseflow {

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::converged: return "converged";
    case StopReason::reached_level: return "reached-level";
    case StopReason::reached_time: return "reached-time";
    case StopReason::event: return "event";
    case StopReason::left_domain: return "left-domain";
    case StopReason::max_time: return "max-time";
  }
  return "unknown";
}

namespace {

constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

// Three-point Gauss-Legendre on [0, 1].
constexpr std::array<double, 3> kGaussNodes = {0.11270166537925831, 0.5, 0.88729833462074169};
constexpr std::array<double, 3> kGaussWeights = {5.0 / 18, 8.0 / 18, 5.0 / 18};

constexpr double kGradientTol = kCriticalGradientTol;

struct StepResult {
  Vec y1, k2, k3, k4, k5, k6, k7;
  double err = 0.0;
};

class Rhs {
 public:
  Rhs(const MorseSystem& sys, int n, int direction, bool variational)
      : sys_(sys), n_(n), dir_(direction), var_(variational) {}

  Vec operator()(int chart, const Vec& y) const {
    ManifoldPoint x{chart, y.head(n_)};
    Vec out(y.size());
    out.head(n_) = sys_.flow_field(x, dir_);
    if (var_) {
      const Mat j = sys_.flow_jacobian(x, dir_);
      Eigen::Map<const Mat> phi(y.data() + n_, n_, n_);
      Eigen::Map<Mat> dphi(out.data() + n_, n_, n_);
      dphi = j * phi;
    }
    return out;
  }

 private:
  const MorseSystem& sys_;
  int n_;
  int dir_;
  bool var_;
};

StepResult dp_step(const Rhs& f, int chart, const Vec& y, const Vec& k1, double h, const IntegratorOptions& o) {
  StepResult r;
  r.k2 = f(chart, y + h * (a21 * k1));
  r.k3 = f(chart, y + h * (a31 * k1 + a32 * r.k2));
  r.k4 = f(chart, y + h * (a41 * k1 + a42 * r.k2 + a43 * r.k3));
  r.k5 = f(chart, y + h * (a51 * k1 + a52 * r.k2 + a53 * r.k3 + a54 * r.k4));
  r.k6 = f(chart, y + h * (a61 * k1 + a62 * r.k2 + a63 * r.k3 + a64 * r.k4 + a65 * r.k5));
  r.y1 = y + h * (a71 * k1 + a73 * r.k3 + a74 * r.k4 + a75 * r.k5 + a76 * r.k6);
  r.k7 = f(chart, r.y1);
  const Vec e = h * (e1 * k1 + e3 * r.k3 + e4 * r.k4 + e5 * r.k5 + e6 * r.k6 + e7 * r.k7);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double sk = o.abs_tol + o.rel_tol * std::max(std::abs(y[i]), std::abs(r.y1[i]));
    acc += (e[i] / sk) * (e[i] / sk);
  }
  r.err = std::sqrt(acc / static_cast<double>(y.size()));
  if (!std::isfinite(r.err)) r.err = std::numeric_limits<double>::infinity();
  return r;
}

Trajectory::Step dense_step(int chart, double t0, double h, const Vec& y, const Vec& k1, const StepResult& r, int n) {
  Trajectory::Step s;
  s.chart = chart;
  s.t0 = t0;
  s.h = h;
  s.r1 = y.head(n);
  s.r2 = r.y1.head(n) - y.head(n);
  s.r3 = h * k1.head(n) - s.r2;
  s.r4 = s.r2 - h * r.k7.head(n) - s.r3;
  s.r5 = h * (d1 * k1.head(n) + d3 * r.k3.head(n) + d4 * r.k4.head(n) + d5 * r.k5.head(n) +
              d6 * r.k6.head(n) + d7 * r.k7.head(n));
  return s;
}

Vec dense_eval(const Trajectory::Step& s, double th) {
  const double th1 = 1.0 - th;
  return s.r1 + th * (s.r2 + th1 * (s.r3 + th * (s.r4 + th1 * s.r5)));
}

}  // namespace

ManifoldPoint Trajectory::state_at(double t) const {
  if (steps.empty() || t >= end_time()) return end();
  if (t <= start_time()) return start();
  auto it = std::upper_bound(steps.begin(), steps.end(), t, [](double v, const Step& s) { return v < s.t0; });
  const Step& s = *(it == steps.begin() ? it : it - 1);
  const double th = std::clamp((t - s.t0) / s.h, 0.0, 1.0);
  return ManifoldPoint{s.chart, dense_eval(s, th)};
}

std::vector<TrajectorySample> Trajectory::refined(int per_step) const {
  std::vector<TrajectorySample> out;
  per_step = std::max(per_step, 1);
  for (const Step& s : steps) {
    for (int j = 0; j < per_step; ++j) {
      const double th = static_cast<double>(j) / per_step;
      out.push_back(TrajectorySample{s.t0 + th * s.h, ManifoldPoint{s.chart, dense_eval(s, th)}, 0.0});
    }
  }
  out.push_back(samples.back());
  return out;
}

Trajectory integrate(const MorseSystem& sys, const ManifoldPoint& x0, const StopCondition& stop,
                     const IntegratorOptions& opts, const std::vector<CriticalPoint>* critical, int direction,
                     bool with_derivative) {
  const Atlas& atlas = sys.atlas();
  if (!atlas.contains(x0)) throw DomainError("integration start point outside its chart");
  if (direction != 1 && direction != -1) throw PreconditionError("direction must be +1 or -1");
  const int n = static_cast<int>(x0.coords.size());
  const Rhs rhs(sys, n, direction, with_derivative);

  Trajectory traj;
  traj.direction = direction;
  int chart = x0.chart;
  Vec y(with_derivative ? n + n * n : n);
  y.head(n) = x0.coords;
  if (with_derivative) Eigen::Map<Mat>(y.data() + n, n, n).setIdentity();
  double t = 0.0;

  auto point = [&](const Vec& v) { return ManifoldPoint{chart, v.head(n)}; };
  // g > 0 before the level is reached, for either direction.
  auto level_gap = [&](const ManifoldPoint& p) { return direction * (sys.value(p) - *stop.level); };
  auto finish = [&](StopReason why) {
    traj.status = why;
    if (with_derivative) traj.derivative = Eigen::Map<const Mat>(y.data() + n, n, n);
    return traj;
  };
  auto record = [&]() { traj.samples.push_back(TrajectorySample{t, point(y), sys.value(point(y))}); };
  auto try_converge = [&]() -> bool {
    if (!stop.converge) return false;
    const ManifoldPoint p = point(y);
    if (sys.gradient_norm(p) >= kGradientTol) return false;
    if (critical == nullptr) return true;
    if (auto id = match_critical(sys, *critical, atlas.canonical(p), opts.convergence_radius)) {
      traj.critical = id;
      return true;
    }
    return false;
  };

  record();
  if (try_converge()) return finish(StopReason::converged);
  if (stop.level && level_gap(point(y)) <= 0.0) return finish(StopReason::reached_level);
  if (stop.event && stop.event(point(y)) <= 0.0) return finish(StopReason::event);
  if (stop.time && *stop.time <= 0.0) return finish(StopReason::reached_time);

  Vec k1 = rhs(chart, y);
  double h = opts.initial_step;
  long nsteps = 0;
  bool last_rejected = false;

  while (true) {
    if (t >= opts.max_time) return finish(StopReason::max_time);
    if (++nsteps > opts.max_steps) return finish(StopReason::max_time);
    bool hit_time = false;
    if (stop.time && t + h >= *stop.time) {
      h = *stop.time - t;
      hit_time = true;
    }
    const double h_min = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
    if (h < h_min) throw IntegrationError("step size underflow", point(y), t);

    StepResult r = dp_step(rhs, chart, y, k1, h, opts);
    if (r.err > 1.0 || !atlas.contains(point(r.y1))) {
      if (std::isfinite(r.err) && r.err <= 1.0 && h < 1e-9) return finish(StopReason::left_domain);
      const double fac = std::isfinite(r.err) ? std::clamp(0.9 * std::pow(r.err, -0.2), 0.2, 1.0) : 0.25;
      h *= (r.err <= 1.0) ? 0.5 : fac;
      last_rejected = true;
      continue;
    }

    Trajectory::Step ds = dense_step(chart, t, h, y, k1, r, n);

    // Locate level/event crossings inside the step on the dense output.
    std::function<double(const ManifoldPoint&)> g;
    StopReason why = StopReason::reached_level;
    if (stop.level && level_gap(point(r.y1)) <= 0.0) {
      g = level_gap;
    } else if (stop.event && stop.event(point(r.y1)) <= 0.0) {
      g = stop.event;
      why = StopReason::event;
    }
    if (g) {
      double lo = 0.0, hi = 1.0;
      for (int it = 0; it < 80 && (hi - lo) > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (g(ManifoldPoint{chart, dense_eval(ds, mid)}) > 0.0) lo = mid; else hi = mid;
      }
      const double hs = hi * h;
      // Retake the step exactly so the variational part is full accuracy.
      StepResult rs = dp_step(rhs, chart, y, k1, hs, opts);
      ds = dense_step(chart, t, hs, y, k1, rs, n);
      for (int j = 0; j < 3; ++j) {
        traj.energy += hs * kGaussWeights[j] *
                       std::pow(sys.gradient_norm(ManifoldPoint{chart, dense_eval(ds, kGaussNodes[j])}), 2);
      }
      traj.steps.push_back(ds);
      y = rs.y1;
      t += hs;
      if (why == StopReason::reached_level) {
        // Newton polish along the flow line onto the exact level.
        for (int it = 0; it < 3; ++it) {
          const ManifoldPoint p = point(y);
          const Vec v = sys.flow_field(p, direction);
          const double slope = sys.function().differential(p).dot(v);
          if (slope == 0.0) break;
          const double tau = (*stop.level - sys.value(p)) / slope;
          if (std::abs(tau) > 1e-3) break;
          const Vec dy = rhs(chart, y);
          y += tau * dy;
          t += tau;
          if (std::abs(tau) < 1e-16) break;
        }
      }
      record();
      return finish(why);
    }

    for (int j = 0; j < 3; ++j) {
      traj.energy += h * kGaussWeights[j] *
                     std::pow(sys.gradient_norm(ManifoldPoint{chart, dense_eval(ds, kGaussNodes[j])}), 2);
    }
    traj.steps.push_back(std::move(ds));
    y = r.y1;
    k1 = r.k7;
    t = hit_time ? *stop.time : t + h;
    record();
    if (hit_time) return finish(StopReason::reached_time);

    const ManifoldPoint p = point(y);
    if (!atlas.in_core(p)) {
      const ManifoldPoint q = atlas.rehome(p);
      if (q.chart != chart) {
        const Mat jt = atlas.transition_jacobian(p, q.chart);
        y.head(n) = q.coords;
        if (with_derivative) {
          Eigen::Map<Mat> phi(y.data() + n, n, n);
          phi = jt * phi;
        }
        chart = q.chart;
        k1 = rhs(chart, y);
        traj.samples.back().x = point(y);
      }
    }
    if (try_converge()) return finish(StopReason::converged);

    double fac = r.err > 0.0 ? 0.9 * std::pow(r.err, -0.2) : 5.0;
    fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 5.0);
    h *= fac;
    last_rejected = false;
  }
}

}  // namespace morseflow
