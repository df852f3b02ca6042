#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "morseflow/manifold.hpp"

namespace morseflow {

/// Corner and collar parametrizations in the local model
/// f = -|v1|^2 + |v2|^2 on V- x V+ = R^m x R^n, level +eps above and -eps below.
enum class CornerVariant {
  /// Near a broken pair: sphere S_p^- x sphere S_q^+ x [0, 1).
  p_corner,
  /// D(p)-type corner: v1 in the ball {|v1|^2 < 2 eps}, v2 on the sphere.
  q_plus,
  /// Mirror of q_plus: v1 on the sphere, v2 in the ball.
  q_minus,
  /// Collar of M(p, r) x S_r^- with the transversal correction theta = identity.
  collar,
};

std::string_view to_string(CornerVariant v);
CornerVariant corner_variant_from_string(std::string_view name);

/// Domain point (v1 in V-, v2 in V+, s).
struct CornerParams {
  Vec v1;
  Vec v2;
  double s = 0.0;
};

/// A pair of points ((z1, z2), (z3, z4)) in (V- x V+)^2.
struct PointPair {
  Vec z1, z2, z3, z4;
};

struct DerivativeReport {
  /// Columns: d/ds, then tangent directions of v2, then of v1.
  Mat finite_difference;
  Mat printed;
  double max_column_error = 0.0;
  double min_singular_value = 0.0;
};

class CornerChart {
 public:
  CornerChart(CornerVariant variant, double eps, int dim_minus = 2, int dim_plus = 2);

  CornerVariant variant() const { return variant_; }
  double epsilon() const { return eps_; }
  int dim_minus() const { return m_; }
  int dim_plus() const { return n_; }
  /// Dimension of the parameter domain (s plus the two factors).
  int domain_dimension() const;

  /// Throws DomainError outside the declared domain.
  PointPair phi(const CornerParams& x) const;
  /// Left inverse of phi on its image. Throws DomainError on degenerate input.
  CornerParams alpha(const PointPair& z) const;
  void check_domain(const CornerParams& x) const;

  /// Uniform-ish random domain point with s in [0, s_max).
  CornerParams sample(std::mt19937_64& rng, double s_max = 1.0) const;
  /// max-norm distance of alpha(phi(x)) from x.
  double round_trip_error(const CornerParams& x) const;

  /// Second-order finite-difference derivative at (v1, v2, 0), compared with
  /// the closed-form columns (v1, 0, 0, v2), (0, e2, 0, 0), (0, 0, e1, 0).
  DerivativeReport derivative_at_boundary(const CornerParams& x, double h = 1e-5) const;

 private:
  bool v1_on_sphere() const;
  bool v2_on_sphere() const;
  /// Orthonormal tangent basis of the v1 (resp. v2) factor at x.
  Mat tangent_basis(const Vec& v, bool sphere) const;
  Vec move(const Vec& v, const Vec& dir, double h, bool sphere) const;
  static Vec flatten(const PointPair& z);

  CornerVariant variant_;
  double eps_;
  int m_, n_;
};

/// Corner chart with the default two-dimensional factors.
CornerChart corner_chart(CornerVariant variant, double eps);

struct CornerCheckSummary {
  CornerVariant variant = CornerVariant::p_corner;
  double epsilon = 1.0;
  int samples = 0;
  double max_round_trip_error = 0.0;
  double max_column_error = 0.0;
  double min_singular_value = 0.0;
};

/// Round trips on `samples` random points and derivative checks on
/// min(samples, 100) boundary points. Deterministic for a given seed.
CornerCheckSummary corner_check(const CornerChart& chart, int samples, std::uint64_t seed = 0xc0de);

}  // namespace morseflow
