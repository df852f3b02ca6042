#include "morseflow/manifold.hpp"

#include <cmath>
#include <limits>

namespace morseflow {

std::string_view to_string(BuiltinKind kind) {
  switch (kind) {
    case BuiltinKind::flat_torus: return "flat-torus";
    case BuiltinKind::ellipsoid_sphere: return "ellipsoid-sphere";
    case BuiltinKind::morse_local_model: return "morse-local-model";
    case BuiltinKind::cp2_chart: return "cp2-chart";
  }
  return "unknown";
}

const ChartSpec& Atlas::chart(int id) const {
  if (id < 0 || id >= static_cast<int>(charts_.size())) {
    throw DescriptorError("unknown chart id " + std::to_string(id));
  }
  return charts_[static_cast<std::size_t>(id)];
}

std::vector<Mat> Atlas::metric_partials(const ManifoldPoint& x) const {
  const int n = chart(x.chart).dim;
  return std::vector<Mat>(static_cast<std::size_t>(n), Mat::Zero(n, n));
}

bool Atlas::in_overlap(const ManifoldPoint& x, int target) const {
  chart(target);
  return x.chart == target;
}

Vec Atlas::map_coords(const ManifoldPoint& x, int /*target*/) const { return x.coords; }

Mat Atlas::map_jacobian(const ManifoldPoint& x, int /*target*/) const {
  const auto n = x.coords.size();
  return Mat::Identity(n, n);
}

ManifoldPoint Atlas::transition(const ManifoldPoint& x, int target) const {
  chart(x.chart);
  chart(target);
  if (!in_overlap(x, target)) {
    throw DomainError("point outside the overlap of charts " + std::to_string(x.chart) + " and " +
                      std::to_string(target));
  }
  if (target == x.chart) return canonical(x);
  return canonical(ManifoldPoint{target, map_coords(x, target)});
}

Mat Atlas::transition_jacobian(const ManifoldPoint& x, int target) const {
  if (!in_overlap(x, target)) {
    throw DomainError("point outside the overlap of charts " + std::to_string(x.chart) + " and " +
                      std::to_string(target));
  }
  if (target == x.chart) {
    const auto n = x.coords.size();
    return Mat::Identity(n, n);
  }
  return map_jacobian(x, target);
}

bool Atlas::contains(const ManifoldPoint& x) const {
  const ChartSpec& c = chart(x.chart);
  if (x.coords.size() != c.dim) return false;
  for (int i = 0; i < c.dim; ++i) {
    if (c.periodic[static_cast<std::size_t>(i)]) continue;
    if (!(x.coords[i] > c.lower[i] - kDomainSlack && x.coords[i] < c.upper[i] + kDomainSlack)) {
      return false;
    }
  }
  return shape_contains(x.coords, 1.0);
}

bool Atlas::in_core(const ManifoldPoint& x) const {
  const ChartSpec& c = chart(x.chart);
  if (x.coords.size() != c.dim) return false;
  for (int i = 0; i < c.dim; ++i) {
    if (c.periodic[static_cast<std::size_t>(i)]) continue;
    const double mid = 0.5 * (c.lower[i] + c.upper[i]);
    const double half = 0.5 * (c.upper[i] - c.lower[i]) * kCoreFraction;
    if (std::abs(x.coords[i] - mid) >= half) return false;
  }
  return shape_contains(x.coords, kCoreFraction);
}

ManifoldPoint Atlas::canonical(const ManifoldPoint& x) const {
  const ChartSpec& c = chart(x.chart);
  ManifoldPoint out = x;
  for (int i = 0; i < c.dim; ++i) {
    if (!c.periodic[static_cast<std::size_t>(i)]) continue;
    double v = std::fmod(out.coords[i], kTwoPi);
    if (v < 0.0) v += kTwoPi;
    // Round-off just below zero would otherwise land at 2 pi.
    if (v >= kTwoPi - 1e-9) v = 0.0;
    out.coords[i] = v;
  }
  return out;
}

Vec Atlas::displacement(const ManifoldPoint& a, const ManifoldPoint& b) const {
  Vec bb;
  if (b.chart == a.chart) {
    bb = b.coords;
  } else {
    if (!in_overlap(b, a.chart)) return Vec();
    bb = map_coords(b, a.chart);
  }
  Vec d = bb - a.coords;
  const ChartSpec& c = chart(a.chart);
  for (int i = 0; i < c.dim; ++i) {
    if (c.periodic[static_cast<std::size_t>(i)]) d[i] = std::remainder(d[i], kTwoPi);
  }
  return d;
}

double Atlas::distance(const ManifoldPoint& a, const ManifoldPoint& b) const {
  const Vec d = displacement(a, b);
  if (d.size() == 0) return std::numeric_limits<double>::infinity();
  const double q = d.dot(metric(a) * d);
  return std::sqrt(std::max(q, 0.0));
}

ManifoldPoint Atlas::rehome(const ManifoldPoint& x) const {
  for (const ChartSpec& c : charts_) {
    if (!in_overlap(x, c.id)) continue;
    ManifoldPoint y = transition(x, c.id);
    if (in_core(y)) return y;
  }
  return canonical(x);
}

double min_metric_eigenvalue(const Mat& g) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (g + g.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

namespace {

double param_or(const ParamTable& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

int int_param(const ParamTable& p, const std::string& key, int fallback) {
  const double v = param_or(p, key, fallback);
  if (v < 0 || std::floor(v) != v) throw DescriptorError("parameter " + key + " must be a non-negative integer");
  return static_cast<int>(v);
}

ChartSpec box_chart(int id, int dim, double half_width, bool periodic) {
  ChartSpec c;
  c.id = id;
  c.dim = dim;
  if (periodic) {
    c.lower = Vec::Zero(dim);
    c.upper = Vec::Constant(dim, kTwoPi);
  } else {
    c.lower = Vec::Constant(dim, -half_width);
    c.upper = Vec::Constant(dim, half_width);
  }
  c.periodic.assign(static_cast<std::size_t>(dim), periodic);
  return c;
}

class FlatTorus final : public Atlas {
 public:
  explicit FlatTorus(const ParamTable& params) {
    params_ = params;
    charts_.push_back(box_chart(0, 2, 0.0, true));
  }
  BuiltinKind kind() const override { return BuiltinKind::flat_torus; }
  int dimension() const override { return 2; }
  Mat metric(const ManifoldPoint& x) const override {
    chart(x.chart);
    return Mat::Identity(2, 2);
  }
};

// Chart 0 projects from the south pole (covers the north pole at u = 0),
// chart 1 from the north pole. The coordinate change is u -> u / |u|^2.
class StereographicSphere final : public Atlas {
 public:
  explicit StereographicSphere(const ParamTable& params) {
    params_ = params;
    const double half = param_or(params, "box", 2.0);
    if (!(half > 1.0)) throw DescriptorError("ellipsoid-sphere box must exceed 1 so the charts overlap");
    charts_.push_back(box_chart(0, 2, half, false));
    charts_.push_back(box_chart(1, 2, half, false));
  }
  BuiltinKind kind() const override { return BuiltinKind::ellipsoid_sphere; }
  int dimension() const override { return 2; }

  Mat metric(const ManifoldPoint& x) const override {
    chart(x.chart);
    const double s = x.coords.squaredNorm();
    return Mat::Identity(2, 2) * (4.0 / ((1.0 + s) * (1.0 + s)));
  }

  std::vector<Mat> metric_partials(const ManifoldPoint& x) const override {
    chart(x.chart);
    const double s = x.coords.squaredNorm();
    const double w3 = (1.0 + s) * (1.0 + s) * (1.0 + s);
    std::vector<Mat> out;
    for (int k = 0; k < 2; ++k) out.push_back(Mat::Identity(2, 2) * (-16.0 * x.coords[k] / w3));
    return out;
  }

  bool in_overlap(const ManifoldPoint& x, int target) const override {
    chart(target);
    if (target == x.chart) return true;
    const double s = x.coords.squaredNorm();
    if (s < 1e-300) return false;
    return contains(ManifoldPoint{target, x.coords / s});
  }

 protected:
  Vec map_coords(const ManifoldPoint& x, int /*target*/) const override {
    return x.coords / x.coords.squaredNorm();
  }
  Mat map_jacobian(const ManifoldPoint& x, int /*target*/) const override {
    const double s = x.coords.squaredNorm();
    return (Mat::Identity(2, 2) * s - 2.0 * x.coords * x.coords.transpose()) / (s * s);
  }
};

class LocalModelAtlas final : public Atlas {
 public:
  explicit LocalModelAtlas(const ParamTable& params) {
    params_ = params;
    const int dm = int_param(params, "dim_minus", 1);
    const int dp = int_param(params, "dim_plus", 1);
    if (dm + dp == 0) throw DescriptorError("morse-local-model needs positive dimension");
    const double radius = param_or(params, "radius", 4.0);
    if (!(radius > 0.0)) throw DescriptorError("morse-local-model radius must be positive");
    dim_ = dm + dp;
    charts_.push_back(box_chart(0, dim_, radius, false));
  }
  BuiltinKind kind() const override { return BuiltinKind::morse_local_model; }
  int dimension() const override { return dim_; }
  Mat metric(const ManifoldPoint& x) const override {
    chart(x.chart);
    return Mat::Identity(dim_, dim_);
  }

 private:
  int dim_ = 0;
};

// The chart U around r with epsilon = 1: sum v_i^2 < 4.
class Cp2Chart final : public Atlas {
 public:
  explicit Cp2Chart(const ParamTable& params) {
    params_ = params;
    charts_.push_back(box_chart(0, 4, 2.0, false));
  }
  BuiltinKind kind() const override { return BuiltinKind::cp2_chart; }
  int dimension() const override { return 4; }
  Mat metric(const ManifoldPoint& x) const override {
    chart(x.chart);
    Vec d(4);
    d << 1.0, 0.5, 0.25, 0.25;
    return d.asDiagonal();
  }

 protected:
  bool shape_contains(const Vec& coords, double scale) const override {
    const double r = 2.0 * scale;
    return coords.squaredNorm() < r * r + kDomainSlack;
  }
};

}  // namespace

AtlasPtr make_builtin_atlas(std::string_view name, const ParamTable& params) {
  if (name == "flat-torus") return std::make_shared<FlatTorus>(params);
  if (name == "ellipsoid-sphere") return std::make_shared<StereographicSphere>(params);
  if (name == "morse-local-model") return std::make_shared<LocalModelAtlas>(params);
  if (name == "cp2-chart") return std::make_shared<Cp2Chart>(params);
  throw DescriptorError("unknown built-in manifold '" + std::string(name) + "'");
}

}  // namespace morseflow
