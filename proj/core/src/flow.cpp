#include "morseflow/flow.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace morseflow {

FlowMapResult flow_map(const MorseSystem& sys, const ManifoldPoint& x, double b, double a,
                       const IntegratorOptions& opts, const std::vector<CriticalPoint>* critical) {
  const double fx = sys.value(x);
  if (std::abs(fx - b) > 1e-8 * std::max(1.0, std::abs(b))) {
    throw PreconditionError("flow_map start point is not on the source level (f = " + std::to_string(fx) + ")");
  }
  const int direction = a <= b ? 1 : -1;
  FlowMapResult res;
  res.trajectory = integrate(sys, x, StopCondition::at_level(a), opts, critical, direction, true);
  const Trajectory& tr = res.trajectory;
  if (tr.status == StopReason::converged) {
    const int id = tr.critical.value_or(-1);
    throw UndefinedFlowMapError("trajectory converges to critical point " + std::to_string(id) +
                                    " before reaching the target level",
                                id);
  }
  if (tr.status != StopReason::reached_level) {
    throw UndefinedFlowMapError(std::string("trajectory stopped (") + std::string(to_string(tr.status)) +
                                    ") before reaching the target level",
                                -1);
  }
  const ManifoldPoint end = tr.end();
  res.image = sys.atlas().canonical(end);
  res.time = tr.end_time();
  res.variational = tr.derivative;
  const Vec v = sys.flow_field(end, direction);
  const Vec df = sys.function().differential(end);
  const Eigen::Index n = v.size();
  const Mat proj = Mat::Identity(n, n) - v * df.transpose() / df.dot(v);
  res.derivative = proj * res.variational;
  return res;
}

OmegaLimit omega_limit(const MorseSystem& sys, const ManifoldPoint& x, const std::vector<CriticalPoint>& critical,
                       const IntegratorOptions& opts, int direction) {
  OmegaLimit out;
  StopCondition stop;
  stop.converge = true;
  out.trajectory = integrate(sys, x, stop, opts, &critical, direction, false);
  switch (out.trajectory.status) {
    case StopReason::converged:
      if (out.trajectory.critical) {
        out.status = OmegaStatus::converged;
        out.critical = out.trajectory.critical;
      }
      break;
    case StopReason::left_domain: out.status = OmegaStatus::left_domain; break;
    default: out.status = OmegaStatus::inconclusive; break;
  }
  return out;
}

namespace {

double crit_distance(const MorseSystem& sys, const CriticalPoint& c, const ManifoldPoint& x) {
  return sys.atlas().distance(c.position, sys.atlas().canonical(x));
}

}  // namespace

BrokenDecomposition decompose_to_broken(const MorseSystem& sys, const Trajectory& traj,
                                        const std::vector<CriticalPoint>& critical, double rho) {
  if (!(rho > 0.0)) throw PreconditionError("dwell radius must be positive");
  for (std::size_t i = 0; i < critical.size(); ++i) {
    for (std::size_t j = i + 1; j < critical.size(); ++j) {
      if (sys.atlas().distance(critical[i].position, critical[j].position) < 2.0 * rho) {
        throw ConfigurationError("dwell balls of " + critical[i].label + " and " + critical[j].label +
                                 " overlap; choose a smaller radius");
      }
    }
  }

  const std::vector<TrajectorySample> pts = traj.refined(16);
  auto inside = [&](const ManifoldPoint& x) -> int {
    for (const CriticalPoint& c : critical) {
      if (crit_distance(sys, c, x) < rho) return c.id;
    }
    return -1;
  };
  auto by_id = [&](int id) -> const CriticalPoint& {
    for (const CriticalPoint& c : critical) {
      if (c.id == id) return c;
    }
    throw ConsistencyError("unknown critical id");
  };
  // Boundary crossing time between an outside and an inside time (either order).
  auto crossing = [&](double t_out, double t_in, const CriticalPoint& c) {
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (t_out + t_in);
      if (crit_distance(sys, c, traj.state_at(mid)) < rho) t_in = mid; else t_out = mid;
    }
    return 0.5 * (t_out + t_in);
  };

  BrokenDecomposition out;
  std::size_t i = 0;
  while (i < pts.size()) {
    const int id = inside(pts[i].x);
    if (id < 0) {
      ++i;
      continue;
    }
    const CriticalPoint& c = by_id(id);
    std::size_t j = i;
    std::size_t best = i;
    double best_d = std::numeric_limits<double>::infinity();
    while (j < pts.size() && inside(pts[j].x) == id) {
      const double d = crit_distance(sys, c, pts[j].x);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
      ++j;
    }
    DwellRecord rec;
    rec.critical = id;
    rec.entry_time = i == 0 ? pts[0].t : crossing(pts[i - 1].t, pts[i].t, c);
    rec.exit_time = j == pts.size() ? pts.back().t : crossing(pts[j].t, pts[j - 1].t, c);
    // Golden-section refinement of the closest approach around the best sample.
    double lo = pts[best == 0 ? 0 : best - 1].t;
    double hi = pts[std::min(best + 1, pts.size() - 1)].t;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 80 && hi - lo > 1e-12; ++it) {
      const double m1 = hi - gr * (hi - lo), m2 = lo + gr * (hi - lo);
      if (crit_distance(sys, c, traj.state_at(m1)) < crit_distance(sys, c, traj.state_at(m2))) hi = m2; else lo = m1;
    }
    rec.closest_distance = std::min(best_d, crit_distance(sys, c, traj.state_at(0.5 * (lo + hi))));
    out.dwells.push_back(rec);
    out.skeleton.push_back(id);
    i = j;
  }
  if (traj.status == StopReason::converged && traj.critical &&
      (out.skeleton.empty() || out.skeleton.back() != *traj.critical)) {
    out.skeleton.push_back(*traj.critical);
  }
  return out;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, int per_step) {
  const auto n = traj.start().coords.size();
  out << "t,chart";
  for (Eigen::Index i = 0; i < n; ++i) out << ",x" << i;
  out << '\n';
  out.precision(17);
  for (const TrajectorySample& s : traj.refined(per_step)) {
    out << s.t << ',' << s.x.chart;
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << s.x.coords[i];
    out << '\n';
  }
}

}  // namespace morseflow
