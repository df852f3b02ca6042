#include "morseflow/cp2gap.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

namespace morseflow {

namespace {

void require_four(const Vec& v, const char* what) {
  if (v.size() != 4) throw DomainError(std::string(what) + ": expected a 4-vector");
}

double radius_sq(const Vec& v, double t) {
  double r = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double c = std::exp(Cp2LocalModel::exponents[i] * t) * v[i];
    r += c * c;
  }
  return r;
}

Vec closed_form(const Vec& v, double t) {
  Vec out(4);
  for (int i = 0; i < 4; ++i) out[i] = std::exp(Cp2LocalModel::exponents[i] * t) * v[i];
  return out;
}

ManifoldPoint in_chart(const Vec& v) { return ManifoldPoint{0, v}; }

}  // namespace

double Cp2LocalModel::value(const Vec& v) {
  require_four(v, "cp2 value");
  return 0.5 * (-v[0] * v[0] - v[1] * v[1] + v[2] * v[2] + v[3] * v[3]);
}

Vec cp2_flow(const Vec& v, double t) {
  require_four(v, "cp2_flow");
  if (!std::isfinite(t)) throw DomainError("cp2_flow: non-finite time");
  const double r_max = Cp2LocalModel::chart_radius_sq;
  if (!(radius_sq(v, 0.0) < r_max)) throw ChartExitError("cp2_flow: start point outside the chart", 0.0);
  // The squared radius is a sum of exponentials in t, hence convex: it stays
  // inside on [0, t] iff it is inside at t, and the exit time is unique.
  if (radius_sq(v, t) >= r_max) {
    double inside = 0.0, outside = t;
    for (int i = 0; i < 200 && std::abs(outside - inside) > 1e-15 * std::max(1.0, std::abs(t)); ++i) {
      const double mid = 0.5 * (inside + outside);
      (radius_sq(v, mid) < r_max ? inside : outside) = mid;
    }
    throw ChartExitError("cp2_flow: trajectory leaves the chart at t = " + std::to_string(outside), outside);
  }
  return closed_form(v, t);
}

double cp2_d(double v1, double v2) {
  const double q = v1 * v1;
  return 0.5 * q + 0.5 * std::sqrt(q * q + 4.0 * v2 * v2);
}

Vec cp2_connect_cylinders(const Vec& v) {
  require_four(v, "cp2_connect_cylinders");
  if (std::abs(v[2] * v[2] + v[3] * v[3] - 1.0) > 1e-9) {
    throw PreconditionError("cp2_connect_cylinders: (v3, v4) must lie on the unit circle");
  }
  if (v[0] == 0.0 && v[1] == 0.0) {
    throw BrokenLineError("cp2_connect_cylinders: (v1, v2) = 0 flows into the critical point");
  }
  const double d = cp2_d(v[0], v[1]);
  Vec out(4);
  out << v[0] / std::sqrt(d), v[1] / d, d * d * v[2], d * d * v[3];
  return out;
}

Vec cp2_connect_levels(const Vec& v) {
  require_four(v, "cp2_connect_levels");
  if (std::abs(Cp2LocalModel::value(v) - 0.5) > 1e-9) throw PreconditionError("cp2_connect_levels: f(v) != 1/2");
  if (v[0] == 0.0 && v[1] == 0.0) {
    throw BrokenLineError("cp2_connect_levels: (v1, v2) = 0 flows into the critical point");
  }
  // Level 1/2 to the cylinder v3^2 + v4^2 = 1: e^{-8t} (v3^2 + v4^2) = 1.
  const double c = v[2] * v[2] + v[3] * v[3];
  Vec on_cyl = closed_form(v, std::log(c) / 8.0);
  on_cyl.tail<2>() /= on_cyl.tail<2>().norm();
  const Vec w = cp2_connect_cylinders(on_cyl);
  // From {v1^2 + v2^2 = 1} to f = -1/2; f decreases strictly along the flow.
  auto g = [&](double t) { return Cp2LocalModel::value(closed_form(w, t)) + 0.5; };
  double lo = -1.0, hi = 1.0;
  while (g(lo) < 0.0) lo *= 2.0;
  while (g(hi) > 0.0) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0.0 ? lo : hi) = mid;
  }
  return closed_form(w, 0.5 * (lo + hi));
}

Vec cp2_connect_cylinders_numeric(const MorseSystem& sys, const Vec& v, const IntegratorOptions& opts) {
  require_four(v, "cp2_connect_cylinders_numeric");
  // Points with v1^2 + v2^2 > 1 reach the target cylinder backward in time.
  const int direction = v.head<2>().squaredNorm() > 1.0 ? -1 : 1;
  StopCondition stop;
  stop.converge = false;
  stop.event = [direction](const ManifoldPoint& x) {
    return direction * (1.0 - x.coords.head<2>().squaredNorm());
  };
  const Trajectory tr = integrate(sys, in_chart(v), stop, opts, nullptr, direction);
  if (tr.status != StopReason::event) {
    throw IntegrationError("cp2_connect_cylinders_numeric: cylinder not reached (" +
                               std::string(to_string(tr.status)) + ")",
                           tr.end(), tr.end_time());
  }
  return tr.end().coords;
}

Vec cp2_connect_levels_numeric(const MorseSystem& sys, const Vec& v, const IntegratorOptions& opts) {
  require_four(v, "cp2_connect_levels_numeric");
  return flow_map(sys, in_chart(v), 0.5, -0.5, opts).image.coords;
}

double blowup_limit(double a, double b) { return a / std::sqrt(cp2_d(a, b)); }

std::vector<double> blowup_grid(double s_min, double s_max) {
  if (!(s_min > 0.0) || !(s_max >= s_min)) throw PreconditionError("blowup_grid: need 0 < s_min <= s_max");
  std::vector<double> grid;
  for (int k = 0;; ++k) {
    const double s = s_max * std::pow(10.0, -k);
    if (s < s_min * (1.0 - 1e-12)) break;
    grid.push_back(s);
  }
  return grid;
}

std::vector<BlowupScanRow> c1_blowup_scan(double a, double b, const std::vector<double>& s_grid, double phi) {
  if (a == 0.0 || !std::isfinite(a)) {
    throw PreconditionError("c1_blowup_scan: a must be nonzero (the curve must leave the corner transversally)");
  }
  if (!std::isfinite(b)) throw PreconditionError("c1_blowup_scan: b must be finite");
  if (s_grid.empty()) throw PreconditionError("c1_blowup_scan: empty s grid");
  for (std::size_t i = 0; i < s_grid.size(); ++i) {
    if (!(s_grid[i] > 0.0)) throw PreconditionError("c1_blowup_scan: s must be positive");
    if (i > 0 && !(s_grid[i] < s_grid[i - 1])) throw PreconditionError("c1_blowup_scan: s grid must decrease");
  }
  std::vector<BlowupScanRow> rows;
  rows.reserve(s_grid.size());
  const double limit = blowup_limit(a, b);
  for (double s : s_grid) {
    BlowupScanRow row;
    row.s = s;
    row.a = a;
    row.b = b;
    row.upper = Vec(4);
    row.upper << a * s, b * s * s, std::cos(phi), std::sin(phi);
    if (!(row.upper.squaredNorm() < Cp2LocalModel::chart_radius_sq)) {
      throw DomainError("c1_blowup_scan: s = " + std::to_string(s) + " puts the curve outside the chart");
    }
    row.lower = cp2_connect_cylinders(row.upper);
    row.d = cp2_d(row.upper[0], row.upper[1]);
    row.v5 = row.lower[0];
    row.limit = limit;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_blowup_csv(std::ostream& os, const std::vector<BlowupScanRow>& rows) {
  os << "s,a,b,v1,v2,v3,v4,v5,v6,v7,v8,d,L\n";
  os << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.s << ',' << r.a << ',' << r.b;
    for (int i = 0; i < 4; ++i) os << ',' << r.upper[i];
    for (int i = 0; i < 4; ++i) os << ',' << r.lower[i];
    os << ',' << r.d << ',' << r.limit << '\n';
  }
}

}  // namespace morseflow
