#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "morseflow/error.hpp"

namespace morseflow {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using ParamTable = std::map<std::string, double>;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;
/// Points this close to a chart boundary still count as inside.
inline constexpr double kDomainSlack = 1e-9;
/// Fraction of the chart box kept as the switching core.
inline constexpr double kCoreFraction = 0.9;

struct ManifoldPoint {
  int chart = 0;
  Vec coords;
};

struct TangentVector {
  ManifoldPoint base;
  Vec components;
};

/// One coordinate chart: an open box, some coordinates possibly periodic.
/// Periodic coordinates are unconstrained by the box and reduce mod 2*pi.
struct ChartSpec {
  int id = 0;
  int dim = 0;
  Vec lower;
  Vec upper;
  std::vector<bool> periodic;
};

enum class BuiltinKind { flat_torus, ellipsoid_sphere, morse_local_model, cp2_chart };

std::string_view to_string(BuiltinKind kind);

/// Immutable atlas plus Riemannian metric field.
class Atlas {
 public:
  virtual ~Atlas() = default;

  virtual BuiltinKind kind() const = 0;
  virtual int dimension() const = 0;
  const std::vector<ChartSpec>& charts() const { return charts_; }
  const ChartSpec& chart(int id) const;
  const ParamTable& params() const { return params_; }

  /// Metric coefficients at a point.
  virtual Mat metric(const ManifoldPoint& x) const = 0;
  /// Partial derivatives d(metric)/dx_k, one matrix per coordinate.
  virtual std::vector<Mat> metric_partials(const ManifoldPoint& x) const;

  /// Whether the target chart can express x.
  virtual bool in_overlap(const ManifoldPoint& x, int target) const;
  /// Same manifold point in the target chart. Throws DomainError outside the overlap.
  ManifoldPoint transition(const ManifoldPoint& x, int target) const;
  /// Jacobian of the coordinate change at x (target coords w.r.t. source coords).
  Mat transition_jacobian(const ManifoldPoint& x, int target) const;

  /// Inside the chart domain (periodic coordinates always inside).
  bool contains(const ManifoldPoint& x) const;
  /// Inside the 90% core of the chart box.
  bool in_core(const ManifoldPoint& x) const;
  /// Periodic coordinates reduced to [0, 2*pi).
  ManifoldPoint canonical(const ManifoldPoint& x) const;

  /// Coordinate displacement b - a expressed in a's chart; periodic
  /// coordinates use the minimal image. Empty optional-like result signalled
  /// by a zero-size vector when b cannot be expressed in a's chart.
  Vec displacement(const ManifoldPoint& a, const ManifoldPoint& b) const;
  /// Metric length of the displacement (metric frozen at a); +inf if the
  /// points share no chart.
  double distance(const ManifoldPoint& a, const ManifoldPoint& b) const;

  /// Lowest-numbered chart whose core contains x, falling back to x.chart.
  ManifoldPoint rehome(const ManifoldPoint& x) const;

 protected:
  virtual Vec map_coords(const ManifoldPoint& x, int target) const;
  virtual Mat map_jacobian(const ManifoldPoint& x, int target) const;
  /// Extra (non-box) domain constraint; scale < 1 shrinks it to the core.
  virtual bool shape_contains(const Vec& /*coords*/, double /*scale*/) const { return true; }

  std::vector<ChartSpec> charts_;
  ParamTable params_;
};

using AtlasPtr = std::shared_ptr<const Atlas>;

/// Built-in atlases by name: flat-torus, ellipsoid-sphere, morse-local-model,
/// cp2-chart.
///
/// Parameters:
///   morse-local-model: dim_minus (1), dim_plus (1), radius (4): box half width.
///   ellipsoid-sphere:  box (2): half width of each stereographic box.
AtlasPtr make_builtin_atlas(std::string_view name, const ParamTable& params = {});

/// Metric checks shared by tests and the pipeline.
double min_metric_eigenvalue(const Mat& g);

}  // namespace morseflow
