#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "morseflow/flow.hpp"
#include "morseflow/moduli.hpp"
#include "morseflow/morse.hpp"

namespace mftest {

using namespace morseflow;

inline constexpr double kPi = std::numbers::pi;

inline const MorseSystem& torus() {
  static const MorseSystem s = make_builtin_system("flat-torus");
  return s;
}
inline const MorseSystem& ellipsoid() {
  static const MorseSystem s = make_builtin_system("ellipsoid-sphere");
  return s;
}
inline const MorseSystem& cp2() {
  static const MorseSystem s = make_builtin_system("cp2-chart");
  return s;
}

inline const std::vector<CriticalPoint>& torus_crit() {
  static const auto c = find_critical_points(torus());
  return c;
}
inline const std::vector<CriticalPoint>& ellipsoid_crit() {
  static const auto c = find_critical_points(ellipsoid());
  return c;
}

inline ModuliSolver& torus_solver() {
  static ModuliSolver s(torus(), torus_crit());
  return s;
}
inline ModuliSolver& ellipsoid_solver() {
  static ModuliSolver s(ellipsoid(), ellipsoid_crit());
  return s;
}

/// Torus ids in (chart, lexicographic) order.
inline constexpr int kP = 0;  // (0, 0)
inline constexpr int kS = 1;  // (0, pi)
inline constexpr int kR = 2;  // (pi, 0)
inline constexpr int kQ = 3;  // (pi, pi)

inline ManifoldPoint pt(double a, double b, int chart = 0) {
  Eigen::VectorXd v(2);
  v << a, b;
  return ManifoldPoint{chart, v};
}

/// Point of the unit sphere for the stereographic charts (chart 0 covers z = 1).
inline Eigen::Vector3d sphere_point(const ManifoldPoint& x) {
  const double s = x.coords.squaredNorm();
  const double z = (1.0 - s) / (1.0 + s);
  return {2.0 * x.coords[0] / (1.0 + s), 2.0 * x.coords[1] / (1.0 + s), x.chart == 0 ? z : -z};
}

/// Ellipsoid critical point nearest to the unit vector `axis`.
inline int ellipsoid_id(const Eigen::Vector3d& axis) {
  int best = -1;
  double dist = 1e9;
  for (const auto& c : ellipsoid_crit()) {
    const double d = (sphere_point(c.position) - axis).norm();
    if (d < dist) dist = d, best = c.id;
  }
  return best;
}

/// Distance in the atlas (periodic-aware) between two points.
inline double dist(const MorseSystem& sys, const ManifoldPoint& a, const ManifoldPoint& b) {
  const Eigen::VectorXd d = sys.atlas().displacement(a, b);
  if (d.size() == 0) return 1e300;
  return d.norm();
}

/// The point on the ray center + r * dir (r > 0) where f first equals level.
/// f must decrease monotonically along the ray from the center up to r_max.
inline ManifoldPoint on_level_along_ray(const MorseSystem& sys, const ManifoldPoint& center,
                                        const Eigen::VectorXd& dir, double level, double r_max) {
  auto at = [&](double r) { return ManifoldPoint{center.chart, center.coords + r * dir}; };
  double lo = 0.0, hi = r_max;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (sys.function().value(at(mid)) > level ? lo : hi) = mid;
  }
  return at(0.5 * (lo + hi));
}

/// Random non-critical points in the chart cores.
inline std::vector<ManifoldPoint> random_points(const MorseSystem& sys, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<ManifoldPoint> out;
  const Atlas& a = sys.atlas();
  while (static_cast<int>(out.size()) < n) {
    const int chart = static_cast<int>(rng() % a.charts().size());
    const ChartSpec& c = a.chart(chart);
    Vec x(c.dim);
    for (int k = 0; k < c.dim; ++k) x[k] = c.periodic[k] ? kPi * (1 + u(rng)) : 0.8 * c.upper[k] * u(rng);
    const ManifoldPoint p{chart, x};
    if (a.in_core(p) && sys.gradient_norm(p) > 1e-3) out.push_back(p);
  }
  return out;
}

/// Worst relative error of D against central differences of "flow to level a"
/// from x +- h w, over level-tangent coordinate directions w.
inline double flow_map_fd_error(const MorseSystem& sys, const ManifoldPoint& x, double a, const Mat& d,
                                const IntegratorOptions& opts) {
  double worst = 0.0;
  const double h = 1e-5;
  const Vec df = sys.function().differential(x);
  const int n = static_cast<int>(x.coords.size());
  for (int k = 0; k < n; ++k) {
    Vec w = Vec::Unit(n, k);
    w -= df * (df.dot(w) / df.squaredNorm());
    if (w.norm() < 1e-3) continue;
    w.normalize();
    ManifoldPoint xp = x, xm = x;
    xp.coords += h * w;
    xm.coords -= h * w;
    const auto ep = integrate(sys, xp, StopCondition::at_level(a), opts);
    const auto em = integrate(sys, xm, StopCondition::at_level(a), opts);
    const Vec fd = (sys.atlas().displacement(ep.end(), em.end()) * -1.0) / (2 * h);
    const Vec dw = d * w;
    worst = std::max(worst, (fd - dw).norm() / std::max(dw.norm(), 1e-3));
  }
  return worst;
}

}  // namespace mftest
