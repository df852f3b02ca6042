#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "morseflow/manifold.hpp"

namespace morseflow {

/// Closed-form f with coordinate differential and Hessian in every chart.
class MorseFunction {
 public:
  virtual ~MorseFunction() = default;
  virtual double value(const ManifoldPoint& x) const = 0;
  /// Coordinate differential (partial derivatives), not the metric gradient.
  virtual Vec differential(const ManifoldPoint& x) const = 0;
  virtual Mat hessian(const ManifoldPoint& x) const = 0;
};

using MorseFunctionPtr = std::shared_ptr<const MorseFunction>;

/// The function attached to a built-in atlas.
///
///   flat-torus:        a1 cos(theta1) + a2 cos(theta2)        (a1 = a2 = 1)
///   ellipsoid-sphere:  a x^2 + b y^2 + c z^2 on the unit sphere (1, 2, 3)
///   morse-local-model: value - |v_minus|^2 / 2 + |v_plus|^2 / 2  (value = 0)
///   cp2-chart:         (-v1^2 - v2^2 + v3^2 + v4^2) / 2
MorseFunctionPtr make_builtin_function(const Atlas& atlas, const ParamTable& params = {});

/// Manifold, metric and function together; everything flow-related hangs off this.
class MorseSystem {
 public:
  MorseSystem(AtlasPtr atlas, MorseFunctionPtr f) : atlas_(std::move(atlas)), f_(std::move(f)) {}

  const Atlas& atlas() const { return *atlas_; }
  const AtlasPtr& atlas_ptr() const { return atlas_; }
  const MorseFunction& function() const { return *f_; }

  double value(const ManifoldPoint& x) const { return f_->value(x); }
  /// Riemannian gradient G^{-1} df in chart coordinates.
  Vec gradient(const ManifoldPoint& x) const;
  /// Metric norm of the gradient.
  double gradient_norm(const ManifoldPoint& x) const;
  /// Vector field -grad f (direction = +1) or +grad f (direction = -1).
  Vec flow_field(const ManifoldPoint& x, int direction = 1) const;
  /// Jacobian of flow_field with respect to the chart coordinates.
  Mat flow_jacobian(const ManifoldPoint& x, int direction = 1) const;

 private:
  AtlasPtr atlas_;
  MorseFunctionPtr f_;
};

MorseSystem make_builtin_system(std::string_view name, const ParamTable& manifold_params = {},
                                const ParamTable& function_params = {});

inline constexpr double kCriticalGradientTol = 1e-8;
inline constexpr double kEigenGap = 1e-6;
inline constexpr double kDedupRadius = 1e-6;
inline constexpr double kTrivialityWarnLevel = 1e-3;

struct CriticalPoint {
  int id = 0;
  std::string label;
  ManifoldPoint position;
  double value = 0.0;
  int index = 0;
  /// Generalized eigenvalues of the pencil (H, G), ascending.
  Vec eigenvalues;
  /// G-orthonormal eigenvectors as columns, same order.
  Mat eigenvectors;
  /// Ordered basis of V- declaring the orientation of the descending manifold.
  Mat orientation_frame;

  int dim() const { return static_cast<int>(eigenvalues.size()); }
  Mat negative_frame() const { return eigenvectors.leftCols(index); }
  Mat positive_frame() const { return eigenvectors.rightCols(dim() - index); }
  /// +1 if orientation_frame agrees with the default eigenbasis, -1 otherwise.
  int orientation_sign() const;
};

/// Analyze one nondegenerate zero of the gradient (throws ConsistencyError
/// when the eigen-gap test fails).
CriticalPoint analyze_critical_point(const MorseSystem& sys, const ManifoldPoint& x);

struct CriticalSearchOptions {
  /// Seeds per coordinate per chart.
  int grid = 16;
  /// Newton stops once the coordinate differential falls below this.
  double tol = 1e-13;
  int max_newton = 60;
};

/// Newton's method from a uniform seed grid in every chart, deduplicated.
/// Output sorted by (chart, lexicographic coordinates); ids and labels c0, c1, ...
std::vector<CriticalPoint> find_critical_points(const MorseSystem& sys,
                                                const CriticalSearchOptions& opts = {});

/// Reverse the first vector of the orientation frame of each listed point.
void flip_orientation(std::vector<CriticalPoint>& crits, const std::vector<int>& ids);

/// Index of the critical point within radius of x, if any.
std::optional<int> match_critical(const MorseSystem& sys, const std::vector<CriticalPoint>& crits,
                                  const ManifoldPoint& x, double radius);

/// Affine linearization h(v) = p + E v of a Morse chart on the ball |v| <= epsilon,
/// with the measured distance from the exact local model.
struct MorseChartReport {
  int critical = 0;
  double epsilon = 0.0;
  ManifoldPoint center;
  /// Columns: eigenvectors scaled by 1/sqrt|lambda| so that E^T H E = diag(-1.., +1..).
  Mat linear_map;
  /// max |f(h(v)) - (f(p) - |v-|^2/2 + |v+|^2/2)| over samples.
  double function_defect = 0.0;
  /// max |h^* g - I| (entrywise) over samples.
  double metric_defect = 0.0;
  double defect() const { return function_defect + metric_defect; }
  bool locally_trivial(double tol = kTrivialityWarnLevel) const { return defect() <= tol; }
};

MorseChartReport morse_chart(const MorseSystem& sys, const CriticalPoint& p, double epsilon,
                             int samples = 2000);

/// Symmetric positive operator A with A v1 = v2,
/// self-adjoint for the inner product <a, b> = a^T g b.
/// Requires <v1, v2> > 0. Colinear inputs give (|v2|/|v1|) Id.
Mat metric_operator(const Vec& v1, const Vec& v2, const Mat& g);
Mat metric_operator(const Vec& v1, const Vec& v2);

/// Unit-vector core A2(e1, e2) of metric_operator.
Mat unit_metric_operator(const Vec& e1, const Vec& e2, const Mat& g);

/// Gradient-like field X turned into a metric: returns A at x such that the
/// metric <A., .> has gradient X. Identity at critical points.
Mat gradient_like_to_metric(const std::function<Vec(const ManifoldPoint&)>& field,
                            const MorseSystem& sys, const ManifoldPoint& x);

/// A(X, grad f) as a field over the manifold.
class MetricOperatorField {
 public:
  MetricOperatorField(std::function<Vec(const ManifoldPoint&)> field, const MorseSystem& sys)
      : field_(std::move(field)), sys_(&sys) {}
  Mat at(const ManifoldPoint& x) const { return gradient_like_to_metric(field_, *sys_, x); }
  /// The new metric coefficients g A at x.
  Mat metric_at(const ManifoldPoint& x) const { return sys_->atlas().metric(x) * at(x); }

 private:
  std::function<Vec(const ManifoldPoint&)> field_;
  const MorseSystem* sys_;
};

}  // namespace morseflow
