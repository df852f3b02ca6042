#include "morseflow/moduli.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "morseflow/parallel.hpp"

namespace morseflow {

namespace {

double wrap_angle(double t) {
  double v = std::fmod(t, kTwoPi);
  if (v < 0.0) v += kTwoPi;
  return v;
}

double angle_gap(double a, double b) { return std::abs(std::remainder(a - b, kTwoPi)); }

bool point_less(const ManifoldPoint& a, const ManifoldPoint& b) {
  if (a.chart != b.chart) return a.chart < b.chart;
  for (Eigen::Index i = 0; i < a.coords.size(); ++i) {
    if (std::abs(a.coords[i] - b.coords[i]) > 1e-9) return a.coords[i] < b.coords[i];
  }
  return false;
}

}  // namespace

int SphereSampling::gaps() const {
  return static_cast<int>(std::count_if(points.begin(), points.end(), [](const SphereSample& s) { return !s.reached; }));
}

int CurveComponent::weighted_sum() const {
  int s = 0;
  for (const EndpointRecord& e : endpoints) s += e.weighted;
  return s;
}

bool CurveComponent::boundary_orientation_consistent() const {
  if (endpoints.empty()) return true;
  const int ref = endpoints.front().boundary_sign * endpoints.front().weighted;
  return std::all_of(endpoints.begin(), endpoints.end(),
                     [ref](const EndpointRecord& e) { return e.boundary_sign * e.weighted == ref && ref != 0; });
}

int ModuliCurve::weighted_endpoint_sum() const {
  int s = 0;
  for (const CurveComponent& c : components) s += c.weighted_sum();
  return s;
}

int ModuliCurve::endpoint_count() const {
  int s = 0;
  for (const CurveComponent& c : components) s += static_cast<int>(c.endpoints.size());
  return s;
}

ModuliSolver::ModuliSolver(const MorseSystem& sys, std::vector<CriticalPoint> critical, ModuliOptions opts)
    : sys_(sys), crit_(std::move(critical)), opts_(opts) {
  for (std::size_t i = 0; i < crit_.size(); ++i) {
    if (crit_[i].id != static_cast<int>(i)) throw ConsistencyError("critical point ids must equal list positions");
  }
  if (!(opts_.launch_radius > 0.0) || opts_.mesh < 4 || !(opts_.bisect_tol > 0.0) || !(opts_.curve_step > 0.0)) {
    throw PreconditionError("moduli options must be positive (mesh >= 4)");
  }
}

const CriticalPoint& ModuliSolver::point(int id) const {
  if (id < 0 || id >= static_cast<int>(crit_.size())) throw DescriptorError("unknown critical point " + std::to_string(id));
  return crit_[static_cast<std::size_t>(id)];
}

double ModuliSolver::level_below(int p) const {
  const double fp = point(p).value;
  double next = -std::numeric_limits<double>::infinity();
  for (const CriticalPoint& c : crit_) {
    if (c.value < fp - 1e-9) next = std::max(next, c.value);
  }
  return std::isfinite(next) ? 0.5 * (fp + next) : fp - 1.0;
}

double ModuliSolver::level_above(int q) const {
  const double fq = point(q).value;
  double next = std::numeric_limits<double>::infinity();
  for (const CriticalPoint& c : crit_) {
    if (c.value > fq + 1e-9) next = std::min(next, c.value);
  }
  return std::isfinite(next) ? 0.5 * (fq + next) : fq + 1.0;
}

void ModuliSolver::check_level(double a) const {
  for (const CriticalPoint& c : crit_) {
    if (std::abs(a - c.value) < 1e-6) {
      throw LevelError("level " + std::to_string(a) + " is the critical value of " + c.label);
    }
  }
}

double ModuliSolver::dwell_radius() const {
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < crit_.size(); ++i) {
    for (std::size_t j = i + 1; j < crit_.size(); ++j) {
      dmin = std::min(dmin, sys_.atlas().distance(crit_[i].position, crit_[j].position));
    }
  }
  return std::min(0.1, 0.3 * dmin);
}

Vec ModuliSolver::launch_direction(int p, double parameter) const {
  const CriticalPoint& c = point(p);
  switch (c.index) {
    case 0: throw PreconditionError(c.label + " has index 0; its descending sphere is empty");
    case 1: return (parameter > 0.0 ? 1.0 : -1.0) * c.orientation_frame.col(0);
    case 2: return std::cos(parameter) * c.orientation_frame.col(0) + std::sin(parameter) * c.orientation_frame.col(1);
    default: throw UnsupportedError("orbit computations support descending spheres of dimension <= 1");
  }
}

ManifoldPoint ModuliSolver::launch_point(int p, double parameter) const {
  const CriticalPoint& c = point(p);
  return ManifoldPoint{c.position.chart, c.position.coords + opts_.launch_radius * launch_direction(p, parameter)};
}

std::vector<int> ModuliSolver::winding_of(const ManifoldPoint& end, int critical) const {
  const CriticalPoint& c = point(critical);
  const ChartSpec& spec = sys_.atlas().chart(end.chart);
  std::vector<int> w;
  for (int i = 0; i < spec.dim; ++i) {
    if (!spec.periodic[static_cast<std::size_t>(i)]) continue;
    w.push_back(static_cast<int>(std::lround((end.coords[i] - c.position.coords[i]) / kTwoPi)));
  }
  return w;
}

ModuliSolver::Key ModuliSolver::classify(int p, double parameter) const {
  const OmegaLimit om = omega_limit(sys_, launch_point(p, parameter), crit_, opts_.flow);
  Key k;
  if (om.status == OmegaStatus::converged && om.critical) {
    k.critical = *om.critical;
    k.winding = winding_of(om.trajectory.end(), k.critical);
  }
  return k;
}

const ModuliSolver::DescendingAnalysis& ModuliSolver::analysis(int p) {
  if (auto it = analysis_.find(p); it != analysis_.end()) return it->second;
  const CriticalPoint& cp = point(p);
  DescendingAnalysis an;
  if (cp.index == 1) {
    an.ends = {classify(p, 1.0), classify(p, -1.0)};
  } else if (cp.index == 2) {
    const int n = opts_.mesh;
    an.mesh.resize(static_cast<std::size_t>(n));
    an.keys.resize(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) an.mesh[static_cast<std::size_t>(j)] = kTwoPi * (j + 0.5) / n;
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t j) { an.keys[j] = classify(p, an.mesh[j]); });

    for (int j = 0; j < n; ++j) {
      const auto a = static_cast<std::size_t>(j);
      const auto b = static_cast<std::size_t>((j + 1) % n);
      if (an.keys[a] == an.keys[b]) continue;
      Boundary bd;
      bd.lo = an.mesh[a];
      bd.hi = b == 0 ? an.mesh[b] + kTwoPi : an.mesh[b];
      bd.left = an.keys[a];
      bd.right = an.keys[b];
      an.boundaries.push_back(bd);
    }
    const double rho = dwell_radius();
    parallel_for(an.boundaries.size(), [&](std::size_t i) {
      Boundary& bd = an.boundaries[i];
      while (bd.hi - bd.lo > opts_.bisect_tol) {
        const double mid = 0.5 * (bd.lo + bd.hi);
        if (mid <= bd.lo || mid >= bd.hi) break;
        if (classify(p, mid) == bd.left) bd.lo = mid; else bd.hi = mid;
      }
      const OmegaLimit om = omega_limit(sys_, launch_point(p, bd.lo), crit_, opts_.flow);
      const BrokenDecomposition dec = decompose_to_broken(sys_, om.trajectory, crit_, rho);
      for (const DwellRecord& d : dec.dwells) {
        if (d.critical == p || point(d.critical).index != cp.index - 1) continue;
        bd.saddle = d.critical;
        bd.dwell_time = d.dwell_time();
        break;
      }
      if (bd.saddle < 0) {
        throw UnresolvedOrbitError("basin boundary of " + cp.label + " does not pass an index-" +
                                       std::to_string(cp.index - 1) + " critical point",
                                   bd.lo, bd.hi);
      }
    });
  } else if (cp.index > 2) {
    throw UnsupportedError("orbit search from " + cp.label + ": index " + std::to_string(cp.index) +
                           " exceeds the supported maximum of 2");
  }
  return analysis_.emplace(p, std::move(an)).first->second;
}

const std::vector<FlowLineClass>& ModuliSolver::connecting_orbits(int p, int q) {
  if (auto it = classes_.find({p, q}); it != classes_.end()) return it->second;
  const CriticalPoint& cp = point(p);
  const CriticalPoint& cq = point(q);
  if (cp.index - cq.index != 1) throw PreconditionError("connecting_orbits needs ind p - ind q = 1");
  std::vector<FlowLineClass> out;
  if (cp.value > cq.value) {
    const DescendingAnalysis& an = analysis(p);
    const double level = level_below(p);
    std::vector<double> params;
    if (cp.index == 1) {
      if (an.ends[0].critical == q) params.push_back(1.0);
      if (an.ends[1].critical == q) params.push_back(-1.0);
    } else {
      for (const Boundary& bd : an.boundaries) {
        if (bd.saddle == q) params.push_back(wrap_angle(0.5 * (bd.lo + bd.hi)));
      }
    }
    for (double t : params) {
      FlowLineClass c;
      c.source = p;
      c.target = q;
      c.parameter = t;
      c.level = level;
      const Trajectory tr = integrate(sys_, launch_point(p, t), StopCondition::at_level(level), opts_.flow, &crit_);
      if (tr.status != StopReason::reached_level) {
        throw UnresolvedOrbitError("orbit representative did not reach its level", t, t);
      }
      c.representative = sys_.atlas().canonical(tr.end());
      if (cp.index == 1) {
        c.winding = an.ends[t > 0 ? 0 : 1].winding;
      } else {
        // Winding is read off where the lifted orbit passes q.
        StopCondition near_q;
        near_q.event = [&](const ManifoldPoint& x) {
          const Vec d = sys_.atlas().displacement(cq.position, sys_.atlas().canonical(x));
          return d.size() == 0 ? 1.0 : d.norm() - 0.5 * dwell_radius();
        };
        const Trajectory tq = integrate(sys_, launch_point(p, t), near_q, opts_.flow, &crit_);
        c.winding = winding_of(tq.end(), q);
      }
      c.sign = orientation_sign(c);
      out.push_back(std::move(c));
    }
    std::sort(out.begin(), out.end(),
              [](const FlowLineClass& a, const FlowLineClass& b) { return point_less(a.representative, b.representative); });
  }
  return classes_.emplace(std::make_pair(p, q), std::move(out)).first->second;
}

int ModuliSolver::orientation_sign(const FlowLineClass& c, std::optional<double> level_offset) const {
  const CriticalPoint& cp = point(c.source);
  const CriticalPoint& cq = point(c.target);
  if (cp.index == 1) {
    // S_p^- is two points; the outward normal picks +1 at +O0 and -1 at -O0.
    return c.parameter > 0.0 ? 1 : -1;
  }
  if (cp.index != 2) throw UnsupportedError("orientation signs support ind p <= 2");

  const double offset = level_offset.value_or(opts_.sign_level_fraction * (cp.value - cq.value));
  const double a = cq.value + offset;
  const double th = c.parameter;
  const Vec tangent = opts_.launch_radius * (-std::sin(th) * cp.orientation_frame.col(0) +
                                             std::cos(th) * cp.orientation_frame.col(1));
  const Trajectory tr =
      integrate(sys_, launch_point(c.source, th), StopCondition::at_level(a), opts_.flow, &crit_, 1, true);
  if (tr.status != StopReason::reached_level) {
    throw DegenerateIntersectionError("sign trajectory did not reach level " + std::to_string(a));
  }
  ManifoldPoint end = tr.end();
  const Vec v = sys_.flow_field(end);
  const Vec df = sys_.function().differential(end);
  const Eigen::Index n = v.size();
  Vec b = (Mat::Identity(n, n) - v * df.transpose() / df.dot(v)) * tr.derivative * tangent;
  if (end.chart != cq.position.chart && !sys_.atlas().in_overlap(end, cq.position.chart)) {
    // Carry the frame further down the orbit, to the default sign level.
    const double low = cq.value + opts_.sign_level_fraction * (cp.value - cq.value);
    const Trajectory more = integrate(sys_, end, StopCondition::at_level(low), opts_.flow, &crit_, 1, true);
    if (more.status != StopReason::reached_level || !sys_.atlas().in_overlap(more.end(), cq.position.chart)) {
      throw DegenerateIntersectionError("sign trajectory never entered the chart of q");
    }
    end = more.end();
    const Vec v2 = sys_.flow_field(end);
    const Vec df2 = sys_.function().differential(end);
    b = (Mat::Identity(n, n) - v2 * df2.transpose() / df2.dot(v2)) * more.derivative * b;
  }
  if (end.chart != cq.position.chart) {
    b = sys_.atlas().transition_jacobian(end, cq.position.chart) * b;
    end = sys_.atlas().transition(end, cq.position.chart);
  }
  const Mat gq = sys_.atlas().metric(cq.position);
  const double bnorm = std::sqrt(b.dot(sys_.atlas().metric(end) * b));
  if (!(bnorm > 0.0)) throw DegenerateIntersectionError("transported S_p^- frame vanished");
  const Mat coeff = cq.orientation_frame.transpose() * gq * (b / bnorm);
  const double det = coeff(0, 0);
  if (std::abs(det) < opts_.degenerate_tol) {
    throw DegenerateIntersectionError("S_p^- and S_q^+ nearly tangent (|det| = " + std::to_string(std::abs(det)) + ")");
  }
  return det > 0.0 ? 1 : -1;
}

int ModuliSolver::signed_count(int p, int q) {
  int s = 0;
  for (const FlowLineClass& c : connecting_orbits(p, q)) s += c.sign;
  return s;
}

const ModuliCurve& ModuliSolver::moduli_curve(int p, int q) {
  if (auto it = curves_.find({p, q}); it != curves_.end()) return it->second;
  ModuliCurve curve = compute_curve(p, q);
  return curves_.emplace(std::make_pair(p, q), std::move(curve)).first->second;
}

ModuliCurve ModuliSolver::compute_curve(int p, int q) {
  const CriticalPoint& cp = point(p);
  const CriticalPoint& cq = point(q);
  if (cp.index - cq.index != 2) throw PreconditionError("moduli_curve needs ind p - ind q = 2");
  if (cp.index != 2) throw UnsupportedError("moduli curves are supported for ind p = 2 only");
  ModuliCurve curve;
  curve.source = p;
  curve.target = q;
  curve.level = level_above(q);
  if (!(cp.value > cq.value)) return curve;

  const DescendingAnalysis& an = analysis(p);
  const int n = opts_.mesh;
  const double rho = dwell_radius();

  // Boundary following mesh index j (between j and j + 1).
  auto boundary_after = [&](int j) -> const Boundary& {
    const double lo0 = an.mesh[static_cast<std::size_t>(j)];
    const double hi0 = j + 1 == n ? an.mesh[0] + kTwoPi : an.mesh[static_cast<std::size_t>(j + 1)];
    for (const Boundary& b : an.boundaries) {
      if (b.lo >= lo0 - 1e-15 && b.hi <= hi0 + 1e-15) return b;
    }
    throw ConsistencyError("missing basin boundary");
  };
  auto same = [&](int a, int b) { return an.keys[static_cast<std::size_t>(a)] == an.keys[static_cast<std::size_t>(b)]; };

  auto make_endpoint = [&](const Boundary& bd, int boundary_sign, double inward) {
    EndpointRecord e;
    e.parameter = wrap_angle(0.5 * (bd.lo + bd.hi));
    e.boundary_sign = boundary_sign;
    e.intermediate = bd.saddle;
    if (bd.saddle < 0) return e;
    const int r = bd.saddle;
    const auto& pr = connecting_orbits(p, r);
    for (std::size_t i = 0; i < pr.size(); ++i) {
      if (angle_gap(pr[i].parameter, e.parameter) < 1e-6) e.class_pr = static_cast<int>(i);
    }
    const CriticalPoint& cr = point(r);
    // Closest approach to r scales like sqrt(offset); shrink the offset until
    // the trajectory actually enters the dwell ball.
    for (double offset = opts_.endpoint_offset; offset >= opts_.endpoint_offset * 1e-4 && !e.shadowing_ok;
         offset *= 1e-2) {
      const double t_in = e.parameter + inward * offset;
      const OmegaLimit om = omega_limit(sys_, launch_point(p, t_in), crit_, opts_.flow);
      const BrokenDecomposition dec = decompose_to_broken(sys_, om.trajectory, crit_, rho);
      for (const DwellRecord& d : dec.dwells) {
        if (d.critical != r) continue;
        if (!om.critical || *om.critical != q) break;
        e.shadowing_ok = true;
        e.offset_used = offset;
        e.dwell_time = d.dwell_time();
        const ManifoldPoint exit = sys_.atlas().canonical(om.trajectory.state_at(d.exit_time));
        const Vec disp = sys_.atlas().displacement(cr.position, exit);
        if (disp.size() == 0) break;
        const double along = cr.orientation_frame.col(0).dot(sys_.atlas().metric(cr.position) * disp);
        const double dir = along > 0.0 ? 1.0 : -1.0;
        const auto& rq = connecting_orbits(r, q);
        for (std::size_t i = 0; i < rq.size(); ++i) {
          if (rq[i].parameter == dir) e.class_rq = static_cast<int>(i);
        }
        break;
      }
    }
    if (e.class_pr >= 0 && e.class_rq >= 0) {
      e.product_sign = pr[static_cast<std::size_t>(e.class_pr)].sign *
                       connecting_orbits(r, q)[static_cast<std::size_t>(e.class_rq)].sign;
      e.weighted = ((cp.index - cr.index) % 2 == 0 ? 1 : -1) * e.product_sign;
    }
    return e;
  };

  // Arcs of consecutive mesh points sharing a key that converges to q.
  std::vector<std::pair<int, int>> arcs;  // (first, last) mesh index, last may exceed n for wrap
  if (an.boundaries.empty()) {
    if (an.keys[0].critical == q) arcs.emplace_back(0, n - 1);
  } else {
    int start = 0;
    while (same((start + n - 1) % n, start)) ++start;
    for (int k = 0; k < n;) {
      const int first = start + k;
      int len = 1;
      while (k + len < n && same(first % n, (first + len) % n)) ++len;
      if (an.keys[static_cast<std::size_t>(first % n)].critical == q) arcs.emplace_back(first, first + len - 1);
      k += len;
    }
  }

  for (const auto& [first, last] : arcs) {
    CurveComponent comp;
    comp.winding = an.keys[static_cast<std::size_t>(first % n)].winding;
    if (an.boundaries.empty()) {
      comp.parameter_begin = 0.0;
      comp.parameter_end = kTwoPi;
    } else {
      const Boundary& b0 = boundary_after((first + n - 1) % n);
      const Boundary& b1 = boundary_after(last % n);
      comp.parameter_begin = wrap_angle(0.5 * (b0.lo + b0.hi));
      comp.parameter_end = wrap_angle(0.5 * (b1.lo + b1.hi));
      if (comp.parameter_end <= comp.parameter_begin) comp.parameter_end += kTwoPi;
      comp.endpoints.push_back(make_endpoint(b0, -1, +1.0));
      comp.endpoints.push_back(make_endpoint(b1, +1, -1.0));
    }
    std::vector<double> params;
    for (double t = comp.parameter_begin + opts_.curve_step; t < comp.parameter_end; t += opts_.curve_step) {
      params.push_back(t);
    }
    std::vector<std::optional<ManifoldPoint>> pts(params.size());
    parallel_for(params.size(), [&](std::size_t i) {
      const Trajectory tr =
          integrate(sys_, launch_point(p, params[i]), StopCondition::at_level(curve.level), opts_.flow, &crit_);
      if (tr.status == StopReason::reached_level) pts[i] = sys_.atlas().canonical(tr.end());
    });
    for (const auto& x : pts) {
      if (x) comp.polyline.push_back(*x);
    }
    curve.components.push_back(std::move(comp));
  }
  std::sort(curve.components.begin(), curve.components.end(),
            [](const CurveComponent& a, const CurveComponent& b) { return a.parameter_begin < b.parameter_begin; });
  return curve;
}

SphereSampling ModuliSolver::sample_sphere(int c, double a, int mesh, int direction) const {
  const CriticalPoint& cp = point(c);
  check_level(a);
  if (direction > 0 && !(a < cp.value)) throw LevelError("descending sphere level must lie below f(p)");
  if (direction < 0 && !(a > cp.value)) throw LevelError("ascending sphere level must lie above f(q)");
  const Mat frame = direction > 0 ? Mat(cp.orientation_frame) : cp.positive_frame();
  const int k = static_cast<int>(frame.cols());
  if (mesh <= 0) mesh = opts_.mesh;
  SphereSampling out;
  out.critical = c;
  out.level = a;
  out.ascending = direction < 0;
  std::vector<double> params;
  if (k == 1) {
    params = {1.0, -1.0};
  } else if (k == 2) {
    for (int j = 0; j < mesh; ++j) params.push_back(kTwoPi * j / mesh);
  } else if (k > 2) {
    throw UnsupportedError("sphere sampling supports spheres of dimension <= 1");
  }
  out.points.resize(params.size());
  parallel_for(params.size(), [&](std::size_t i) {
    SphereSample& s = out.points[i];
    s.parameter = params[i];
    s.direction = k == 1 ? Vec(params[i] * frame.col(0))
                         : Vec(std::cos(params[i]) * frame.col(0) + std::sin(params[i]) * frame.col(1));
    const ManifoldPoint x0{cp.position.chart, cp.position.coords + opts_.launch_radius * s.direction};
    const Trajectory tr = integrate(sys_, x0, StopCondition::at_level(a), opts_.flow, &crit_, direction);
    s.reached = tr.status == StopReason::reached_level;
    if (s.reached) {
      s.image = sys_.atlas().canonical(tr.end());
      s.time = tr.end_time();
    }
  });
  out.min_pairwise_distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    for (std::size_t j = i + 1; j < out.points.size(); ++j) {
      if (!out.points[i].reached || !out.points[j].reached) continue;
      const double d = std::min(sys_.atlas().distance(out.points[i].image, out.points[j].image),
                                sys_.atlas().distance(out.points[j].image, out.points[i].image));
      out.min_pairwise_distance = std::min(out.min_pairwise_distance, d);
    }
  }
  return out;
}

SphereSampling ModuliSolver::descending_sphere(int p, double a, int mesh) const { return sample_sphere(p, a, mesh, 1); }

SphereSampling ModuliSolver::ascending_sphere(int q, double a, int mesh) const { return sample_sphere(q, a, mesh, -1); }

}  // namespace morseflow
