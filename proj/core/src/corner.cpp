#include "morseflow/corner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace morseflow {

namespace {

constexpr double kSphereTol = 1e-9;

void require_dim(const Vec& v, int dim, const char* name) {
  if (v.size() != dim) {
    throw DomainError(std::string("corner chart: ") + name + " has dimension " + std::to_string(v.size()) +
                      ", expected " + std::to_string(dim));
  }
}

double safe_norm(const Vec& v, const char* name) {
  const double r = v.norm();
  if (!(r > 0.0) || !std::isfinite(r)) throw DomainError(std::string("corner chart: ") + name + " vanishes");
  return r;
}

Vec random_direction(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> gauss;
  Vec v(dim);
  do {
    for (int i = 0; i < dim; ++i) v[i] = gauss(rng);
  } while (v.norm() < 1e-3);
  return v.normalized();
}

}  // namespace

std::string_view to_string(CornerVariant v) {
  switch (v) {
    case CornerVariant::p_corner: return "p";
    case CornerVariant::q_plus: return "q+";
    case CornerVariant::q_minus: return "q-";
    case CornerVariant::collar: return "collar";
  }
  return "?";
}

CornerVariant corner_variant_from_string(std::string_view name) {
  if (name == "p") return CornerVariant::p_corner;
  if (name == "q+" || name == "q_plus") return CornerVariant::q_plus;
  if (name == "q-" || name == "q_minus") return CornerVariant::q_minus;
  if (name == "collar") return CornerVariant::collar;
  throw DescriptorError("unknown corner variant '" + std::string(name) + "'");
}

CornerChart::CornerChart(CornerVariant variant, double eps, int dim_minus, int dim_plus)
    : variant_(variant), eps_(eps), m_(dim_minus), n_(dim_plus) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw PreconditionError("corner chart: epsilon must be positive");
  if (m_ < 1 || n_ < 1) throw PreconditionError("corner chart: factor dimensions must be positive");
}

bool CornerChart::v1_on_sphere() const { return variant_ != CornerVariant::q_plus; }
bool CornerChart::v2_on_sphere() const { return variant_ != CornerVariant::q_minus; }

int CornerChart::domain_dimension() const {
  return 1 + (v1_on_sphere() ? m_ - 1 : m_) + (v2_on_sphere() ? n_ - 1 : n_);
}

void CornerChart::check_domain(const CornerParams& x) const {
  require_dim(x.v1, m_, "v1");
  require_dim(x.v2, n_, "v2");
  if (!(x.s >= 0.0 && x.s < 1.0)) throw DomainError("corner chart: s = " + std::to_string(x.s) + " outside [0, 1)");
  const double tol = kSphereTol * std::max(1.0, eps_);
  auto check = [&](const Vec& v, bool sphere, const char* name) {
    const double r2 = v.squaredNorm();
    if (sphere) {
      if (std::abs(r2 - eps_) > tol) {
        throw DomainError(std::string("corner chart: ") + name + " is off the sphere of radius sqrt(eps)");
      }
    } else if (!(r2 < 2.0 * eps_)) {
      throw DomainError(std::string("corner chart: ") + name + " is outside the ball |v|^2 < 2 eps");
    }
  };
  check(x.v1, v1_on_sphere(), "v1");
  check(x.v2, v2_on_sphere(), "v2");
}

PointPair CornerChart::phi(const CornerParams& x) const {
  check_domain(x);
  const double s = x.s;
  const double se = std::sqrt(eps_);
  PointPair z;
  switch (variant_) {
    case CornerVariant::p_corner: {
      const double c = std::sqrt(1.0 + s * s);
      z = {s * x.v1, c * x.v2, c * x.v1, s * x.v2};
      break;
    }
    case CornerVariant::q_plus: {
      const double rho = std::sqrt(s * s * x.v1.squaredNorm() + eps_) / se;
      z = {s * x.v1, rho * x.v2, x.v1, s * rho * x.v2};
      break;
    }
    case CornerVariant::q_minus: {
      const double rho = std::sqrt(s * s * x.v2.squaredNorm() + eps_) / se;
      z = {s * rho * x.v1, x.v2, rho * x.v1, s * x.v2};
      break;
    }
    case CornerVariant::collar: {
      const double r2 = x.v2.norm();
      z = {s * x.v1, x.v2, (r2 / se) * x.v1, (s * se / r2) * x.v2};
      break;
    }
  }
  return z;
}

CornerParams CornerChart::alpha(const PointPair& z) const {
  require_dim(z.z1, m_, "z1");
  require_dim(z.z2, n_, "z2");
  require_dim(z.z3, m_, "z3");
  require_dim(z.z4, n_, "z4");
  const double se = std::sqrt(eps_);
  CornerParams x;
  switch (variant_) {
    case CornerVariant::p_corner:
      x.v2 = se * z.z2 / safe_norm(z.z2, "z2");
      x.v1 = se * z.z3 / safe_norm(z.z3, "z3");
      x.s = z.z1.norm() / se;
      break;
    case CornerVariant::q_plus:
      x.v2 = se * z.z2 / safe_norm(z.z2, "z2");
      x.v1 = z.z3;
      x.s = z.z4.norm() / safe_norm(z.z2, "z2");
      break;
    case CornerVariant::q_minus:
      x.v2 = z.z2;
      x.v1 = se * z.z3 / safe_norm(z.z3, "z3");
      x.s = z.z1.norm() / safe_norm(z.z3, "z3");
      break;
    case CornerVariant::collar:
      x.v2 = z.z2;
      x.v1 = se * z.z3 / safe_norm(z.z2, "z2");
      x.s = z.z4.norm() / se;
      break;
  }
  return x;
}

CornerParams CornerChart::sample(std::mt19937_64& rng, double s_max) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double se = std::sqrt(eps_);
  auto draw = [&](int dim, bool sphere) -> Vec {
    const Vec d = random_direction(rng, dim);
    if (sphere) return se * d;
    // Radius uniform in volume of the ball |v| < sqrt(2 eps), kept strictly inside.
    const double r = std::sqrt(2.0 * eps_) * std::pow(unit(rng), 1.0 / dim) * (1.0 - 1e-9);
    return r * d;
  };
  CornerParams x;
  x.v1 = draw(m_, v1_on_sphere());
  x.v2 = draw(n_, v2_on_sphere());
  x.s = std::min(s_max, 1.0) * unit(rng);
  return x;
}

double CornerChart::round_trip_error(const CornerParams& x) const {
  const CornerParams y = alpha(phi(x));
  double err = std::abs(y.s - x.s);
  err = std::max(err, (y.v1 - x.v1).lpNorm<Eigen::Infinity>());
  err = std::max(err, (y.v2 - x.v2).lpNorm<Eigen::Infinity>());
  return err;
}

Mat CornerChart::tangent_basis(const Vec& v, bool sphere) const {
  const int dim = static_cast<int>(v.size());
  if (!sphere) return Mat::Identity(dim, dim);
  // Complete v/|v| to an orthonormal basis; the last dim-1 columns span v-perp.
  Eigen::HouseholderQR<Mat> qr(v.normalized());
  Mat q = qr.householderQ() * Mat::Identity(dim, dim);
  return q.rightCols(dim - 1);
}

Vec CornerChart::move(const Vec& v, const Vec& dir, double h, bool sphere) const {
  if (!sphere) return v + h * dir;
  // Great circle of radius sqrt(eps) through v with initial velocity dir.
  const double r = std::sqrt(eps_);
  return std::cos(h / r) * v + r * std::sin(h / r) * dir;
}

Vec CornerChart::flatten(const PointPair& z) {
  Vec out(z.z1.size() + z.z2.size() + z.z3.size() + z.z4.size());
  out << z.z1, z.z2, z.z3, z.z4;
  return out;
}

DerivativeReport CornerChart::derivative_at_boundary(const CornerParams& x, double h) const {
  CornerParams base = x;
  base.s = 0.0;
  check_domain(base);
  const Mat t2 = tangent_basis(base.v2, v2_on_sphere());
  const Mat t1 = tangent_basis(base.v1, v1_on_sphere());
  const int cols = 1 + static_cast<int>(t2.cols() + t1.cols());
  const int rows = 2 * (m_ + n_);

  DerivativeReport rep;
  rep.finite_difference.resize(rows, cols);
  rep.printed = Mat::Zero(rows, cols);

  // One-sided in s (the domain stops at s = 0), central along the factors.
  {
    CornerParams a = base, b = base;
    a.s = h;
    b.s = 2.0 * h;
    rep.finite_difference.col(0) = (-3.0 * flatten(phi(base)) + 4.0 * flatten(phi(a)) - flatten(phi(b))) / (2.0 * h);
    rep.printed.col(0).segment(0, m_) = base.v1;
    rep.printed.col(0).segment(2 * m_ + n_, n_) = base.v2;
  }
  int c = 1;
  for (int j = 0; j < t2.cols(); ++j, ++c) {
    CornerParams plus = base, minus = base;
    plus.v2 = move(base.v2, t2.col(j), h, v2_on_sphere());
    minus.v2 = move(base.v2, t2.col(j), -h, v2_on_sphere());
    rep.finite_difference.col(c) = (flatten(phi(plus)) - flatten(phi(minus))) / (2.0 * h);
    rep.printed.col(c).segment(m_, n_) = t2.col(j);
  }
  for (int j = 0; j < t1.cols(); ++j, ++c) {
    CornerParams plus = base, minus = base;
    plus.v1 = move(base.v1, t1.col(j), h, v1_on_sphere());
    minus.v1 = move(base.v1, t1.col(j), -h, v1_on_sphere());
    rep.finite_difference.col(c) = (flatten(phi(plus)) - flatten(phi(minus))) / (2.0 * h);
    rep.printed.col(c).segment(m_ + n_, m_) = t1.col(j);
  }

  for (int j = 0; j < cols; ++j) {
    rep.max_column_error =
        std::max(rep.max_column_error, (rep.finite_difference.col(j) - rep.printed.col(j)).lpNorm<Eigen::Infinity>());
  }
  Eigen::JacobiSVD<Mat> svd(rep.finite_difference);
  rep.min_singular_value = svd.singularValues().minCoeff();
  return rep;
}

CornerChart corner_chart(CornerVariant variant, double eps) { return CornerChart(variant, eps); }

CornerCheckSummary corner_check(const CornerChart& chart, int samples, std::uint64_t seed) {
  if (samples < 1) throw PreconditionError("corner_check: samples must be positive");
  std::mt19937_64 rng(seed);
  CornerCheckSummary out;
  out.variant = chart.variant();
  out.epsilon = chart.epsilon();
  out.samples = samples;
  out.min_singular_value = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    const CornerParams x = chart.sample(rng);
    out.max_round_trip_error = std::max(out.max_round_trip_error, chart.round_trip_error(x));
    if (i < 100) {
      const DerivativeReport d = chart.derivative_at_boundary(x);
      out.max_column_error = std::max(out.max_column_error, d.max_column_error);
      out.min_singular_value = std::min(out.min_singular_value, d.min_singular_value);
    }
  }
  return out;
}

}  // namespace morseflow
