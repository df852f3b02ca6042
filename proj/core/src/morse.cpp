#include "morseflow/morse.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

namespace morseflow {

namespace {

double param_or(const ParamTable& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

class TorusFunction final : public MorseFunction {
 public:
  explicit TorusFunction(const ParamTable& p)
      : a1_(param_or(p, "a1", 1.0)), a2_(param_or(p, "a2", 1.0)) {
    if (a1_ == 0.0 || a2_ == 0.0) throw DescriptorError("torus amplitudes must be nonzero");
  }
  double value(const ManifoldPoint& x) const override {
    return a1_ * std::cos(x.coords[0]) + a2_ * std::cos(x.coords[1]);
  }
  Vec differential(const ManifoldPoint& x) const override {
    Vec d(2);
    d << -a1_ * std::sin(x.coords[0]), -a2_ * std::sin(x.coords[1]);
    return d;
  }
  Mat hessian(const ManifoldPoint& x) const override {
    Mat h = Mat::Zero(2, 2);
    h(0, 0) = -a1_ * std::cos(x.coords[0]);
    h(1, 1) = -a2_ * std::cos(x.coords[1]);
    return h;
  }

 private:
  double a1_, a2_;
};

// f = a x^2 + b y^2 + c z^2 pulled back through stereographic projection.
// Both charts give the same formula because the poles are swapped by z -> -z.
//   x = 2u1/w, y = 2u2/w, z = +-(1-s)/w,  s = |u|^2, w = 1+s
//   f = g / w^2,  g = 4a u1^2 + 4b u2^2 + c (1-s)^2
class EllipsoidFunction final : public MorseFunction {
 public:
  explicit EllipsoidFunction(const ParamTable& p)
      : a_(param_or(p, "a", 1.0)), b_(param_or(p, "b", 2.0)), c_(param_or(p, "c", 3.0)) {
    if (a_ == b_ || b_ == c_ || a_ == c_) {
      throw DescriptorError("ellipsoid coefficients must be pairwise distinct for f to be Morse");
    }
  }
  double value(const ManifoldPoint& x) const override {
    const double s = x.coords.squaredNorm();
    const double w = 1.0 + s;
    return g(x.coords, s) / (w * w);
  }
  Vec differential(const ManifoldPoint& x) const override {
    const Vec& u = x.coords;
    const double s = u.squaredNorm();
    const double w = 1.0 + s;
    const double gv = g(u, s);
    const Vec gd = grad_g(u, s);
    return gd / (w * w) - 4.0 * gv * u / (w * w * w);
  }
  Mat hessian(const ManifoldPoint& x) const override {
    const Vec& u = x.coords;
    const double s = u.squaredNorm();
    const double w = 1.0 + s;
    const double gv = g(u, s);
    const Vec gd = grad_g(u, s);
    Mat gh(2, 2);
    gh(0, 0) = 8.0 * a_ - 4.0 * c_ * (1.0 - s) + 8.0 * c_ * u[0] * u[0];
    gh(1, 1) = 8.0 * b_ - 4.0 * c_ * (1.0 - s) + 8.0 * c_ * u[1] * u[1];
    gh(0, 1) = gh(1, 0) = 8.0 * c_ * u[0] * u[1];
    const double w2 = w * w, w3 = w2 * w, w4 = w3 * w;
    Mat h = gh / w2 - 4.0 * (gd * u.transpose() + u * gd.transpose() + gv * Mat::Identity(2, 2)) / w3 +
            24.0 * gv * u * u.transpose() / w4;
    return h;
  }

 private:
  double g(const Vec& u, double s) const {
    return 4.0 * a_ * u[0] * u[0] + 4.0 * b_ * u[1] * u[1] + c_ * (1.0 - s) * (1.0 - s);
  }
  Vec grad_g(const Vec& u, double s) const {
    Vec d(2);
    d << 8.0 * a_ * u[0] - 4.0 * c_ * (1.0 - s) * u[0], 8.0 * b_ * u[1] - 4.0 * c_ * (1.0 - s) * u[1];
    return d;
  }
  double a_, b_, c_;
};

// value - |v_minus|^2/2 + |v_plus|^2/2; the first dim_minus coordinates are v_minus.
class QuadraticFunction final : public MorseFunction {
 public:
  QuadraticFunction(int dim_minus, int dim, double value) : value_(value) {
    signs_ = Vec::Ones(dim);
    signs_.head(dim_minus).setConstant(-1.0);
  }
  double value(const ManifoldPoint& x) const override {
    return value_ + 0.5 * (signs_.array() * x.coords.array().square()).sum();
  }
  Vec differential(const ManifoldPoint& x) const override {
    return (signs_.array() * x.coords.array()).matrix();
  }
  Mat hessian(const ManifoldPoint& /*x*/) const override { return signs_.asDiagonal(); }

 private:
  Vec signs_;
  double value_;
};

}  // namespace

MorseFunctionPtr make_builtin_function(const Atlas& atlas, const ParamTable& params) {
  switch (atlas.kind()) {
    case BuiltinKind::flat_torus: return std::make_shared<TorusFunction>(params);
    case BuiltinKind::ellipsoid_sphere: return std::make_shared<EllipsoidFunction>(params);
    case BuiltinKind::morse_local_model: {
      const int dm = static_cast<int>(param_or(atlas.params(), "dim_minus", 1.0));
      return std::make_shared<QuadraticFunction>(dm, atlas.dimension(), param_or(params, "value", 0.0));
    }
    case BuiltinKind::cp2_chart: return std::make_shared<QuadraticFunction>(2, 4, 0.0);
  }
  throw DescriptorError("no built-in function for this atlas");
}

MorseSystem make_builtin_system(std::string_view name, const ParamTable& manifold_params,
                                const ParamTable& function_params) {
  AtlasPtr atlas = make_builtin_atlas(name, manifold_params);
  MorseFunctionPtr f = make_builtin_function(*atlas, function_params);
  return MorseSystem(std::move(atlas), std::move(f));
}

Vec MorseSystem::gradient(const ManifoldPoint& x) const {
  return atlas_->metric(x).ldlt().solve(f_->differential(x));
}

double MorseSystem::gradient_norm(const ManifoldPoint& x) const {
  const Vec df = f_->differential(x);
  const Vec grad = atlas_->metric(x).ldlt().solve(df);
  return std::sqrt(std::max(df.dot(grad), 0.0));
}

Vec MorseSystem::flow_field(const ManifoldPoint& x, int direction) const {
  return -static_cast<double>(direction) * gradient(x);
}

Mat MorseSystem::flow_jacobian(const ManifoldPoint& x, int direction) const {
  const Mat g = atlas_->metric(x);
  const auto ldlt = g.ldlt();
  const Vec grad = ldlt.solve(f_->differential(x));
  Mat j = -ldlt.solve(f_->hessian(x));
  const std::vector<Mat> dg = atlas_->metric_partials(x);
  for (std::size_t k = 0; k < dg.size(); ++k) {
    j.col(static_cast<Eigen::Index>(k)) += ldlt.solve(dg[k] * grad);
  }
  return static_cast<double>(direction) * j;
}

int CriticalPoint::orientation_sign() const {
  if (index == 0) return 1;
  const Mat v = negative_frame();
  const Mat coeff = (v.transpose() * v).ldlt().solve(v.transpose() * orientation_frame);
  return coeff.determinant() > 0.0 ? 1 : -1;
}

namespace {

// Deterministic sign: the largest-magnitude component is positive.
void normalize_sign(Eigen::Ref<Vec> v) {
  Eigen::Index k = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[k]) + 1e-12) k = i;
  }
  if (v[k] < 0.0) v = -v;
}

}  // namespace

CriticalPoint analyze_critical_point(const MorseSystem& sys, const ManifoldPoint& x) {
  CriticalPoint cp;
  cp.position = x;
  cp.value = sys.value(x);
  const Mat h = sys.function().hessian(x);
  const Mat g = sys.atlas().metric(x);
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(0.5 * (h + h.transpose()), 0.5 * (g + g.transpose()));
  if (es.info() != Eigen::Success) throw ConsistencyError("eigen solver failed at critical point");
  cp.eigenvalues = es.eigenvalues();
  cp.eigenvectors = es.eigenvectors();
  for (Eigen::Index i = 0; i < cp.eigenvalues.size(); ++i) {
    if (std::abs(cp.eigenvalues[i]) < kEigenGap) {
      throw ConsistencyError("degenerate critical point: eigenvalue " + std::to_string(cp.eigenvalues[i]) +
                             " inside the eigen-gap");
    }
    normalize_sign(cp.eigenvectors.col(i));
    if (cp.eigenvalues[i] < 0.0) ++cp.index;
  }
  cp.orientation_frame = cp.negative_frame();
  return cp;
}

namespace {

/// Coordinates closer than 1e-6 compare equal, so Newton noise around zero
/// cannot reorder the ids.
bool lex_less(const ManifoldPoint& a, const ManifoldPoint& b) {
  if (a.chart != b.chart) return a.chart < b.chart;
  for (Eigen::Index i = 0; i < a.coords.size(); ++i) {
    if (std::abs(a.coords[i] - b.coords[i]) > 1e-6) return a.coords[i] < b.coords[i];
  }
  return false;
}

std::optional<ManifoldPoint> newton(const MorseSystem& sys, ManifoldPoint x, const CriticalSearchOptions& opts) {
  const Atlas& atlas = sys.atlas();
  for (int it = 0; it < opts.max_newton; ++it) {
    if (!atlas.contains(x)) return std::nullopt;
    const Vec df = sys.function().differential(x);
    if (!df.allFinite()) return std::nullopt;
    if (df.norm() < opts.tol) return atlas.canonical(x);
    const Mat h = sys.function().hessian(x);
    Eigen::FullPivLU<Mat> lu(h);
    if (!lu.isInvertible()) return std::nullopt;
    Vec step = lu.solve(df);
    // Damp huge steps so a seed far from any zero does not leave the chart at once.
    const double cap = 0.5;
    if (step.norm() > cap) step *= cap / step.norm();
    x.coords -= step;
    x = atlas.canonical(x);
  }
  if (atlas.contains(x) && sys.function().differential(x).norm() < std::max(opts.tol * 1e3, 1e-11)) {
    return x;
  }
  return std::nullopt;
}

}  // namespace

std::vector<CriticalPoint> find_critical_points(const MorseSystem& sys, const CriticalSearchOptions& opts) {
  if (opts.grid < 1 || !(opts.tol > 0.0)) throw PreconditionError("seed grid and tolerance must be positive");
  const Atlas& atlas = sys.atlas();
  std::vector<ManifoldPoint> found;
  for (const ChartSpec& c : atlas.charts()) {
    const int n = c.dim;
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    while (true) {
      ManifoldPoint seed{c.id, Vec(n)};
      for (int i = 0; i < n; ++i) {
        const double lo = c.lower[i], hi = c.upper[i];
        // Cell centers; for periodic coordinates this is a shifted uniform grid.
        seed.coords[i] = lo + (hi - lo) * (idx[static_cast<std::size_t>(i)] + 0.5) / opts.grid;
      }
      if (atlas.contains(seed)) {
        if (auto z = newton(sys, seed, opts)) {
          ManifoldPoint y = atlas.rehome(*z);
          bool dup = false;
          for (const ManifoldPoint& f : found) {
            if (atlas.distance(f, y) < kDedupRadius || atlas.distance(y, f) < kDedupRadius) {
              dup = true;
              break;
            }
          }
          if (!dup) found.push_back(y);
        }
      }
      int k = 0;
      while (k < n && ++idx[static_cast<std::size_t>(k)] == opts.grid) idx[static_cast<std::size_t>(k++)] = 0;
      if (k == n) break;
    }
  }
  std::sort(found.begin(), found.end(), lex_less);
  std::vector<CriticalPoint> out;
  for (const ManifoldPoint& x : found) {
    if (sys.gradient_norm(x) >= kCriticalGradientTol) {
      throw ConsistencyError("Newton limit does not satisfy the critical gradient tolerance");
    }
    CriticalPoint cp = analyze_critical_point(sys, x);
    cp.id = static_cast<int>(out.size());
    cp.label = "c" + std::to_string(cp.id);
    out.push_back(std::move(cp));
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t j = i + 1; j < out.size(); ++j) {
      if (atlas.distance(out[i].position, out[j].position) < kDedupRadius) {
        throw ConsistencyError("duplicate critical points survived deduplication");
      }
    }
  }
  return out;
}

void flip_orientation(std::vector<CriticalPoint>& crits, const std::vector<int>& ids) {
  for (int id : ids) {
    auto it = std::find_if(crits.begin(), crits.end(), [id](const CriticalPoint& c) { return c.id == id; });
    if (it == crits.end()) throw DescriptorError("orientation override names unknown critical point " + std::to_string(id));
    if (it->index == 0) throw PreconditionError("critical point " + it->label + " has index 0; nothing to orient");
    it->orientation_frame.col(0) *= -1.0;
  }
}

std::optional<int> match_critical(const MorseSystem& sys, const std::vector<CriticalPoint>& crits,
                                  const ManifoldPoint& x, double radius) {
  std::optional<int> best;
  double best_d = radius;
  for (const CriticalPoint& c : crits) {
    const double d = std::min(sys.atlas().distance(c.position, x), sys.atlas().distance(x, c.position));
    if (d < best_d) {
      best_d = d;
      best = c.id;
    }
  }
  return best;
}

MorseChartReport morse_chart(const MorseSystem& sys, const CriticalPoint& p, double epsilon, int samples) {
  if (!(epsilon > 0.0)) throw PreconditionError("Morse chart radius must be positive");
  const Atlas& atlas = sys.atlas();
  const int n = p.dim();
  MorseChartReport rep;
  rep.critical = p.id;
  rep.epsilon = epsilon;
  rep.center = p.position;
  rep.linear_map = p.eigenvectors;
  for (int i = 0; i < n; ++i) rep.linear_map.col(i) /= std::sqrt(std::abs(p.eigenvalues[i]));

  // The image of B(epsilon) is an ellipsoid; its coordinate extent along axis i
  // is epsilon times the norm of row i of E.
  const ChartSpec& c = atlas.chart(p.position.chart);
  for (int i = 0; i < n; ++i) {
    if (c.periodic[static_cast<std::size_t>(i)]) continue;
    const double reach = epsilon * rep.linear_map.row(i).norm();
    if (p.position.coords[i] - reach <= c.lower[i] || p.position.coords[i] + reach >= c.upper[i]) {
      throw DomainError("Morse chart radius too large for the chart domain");
    }
  }

  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double f0 = p.value;
  for (int k = 0; k < samples; ++k) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = normal(rng);
    const double nv = v.norm();
    if (nv == 0.0) continue;
    // Boundary samples first, then uniform in the ball.
    const double r = k < samples / 4 ? epsilon : epsilon * std::pow(unif(rng), 1.0 / n);
    v *= r / nv;
    ManifoldPoint y{p.position.chart, p.position.coords + rep.linear_map * v};
    if (!atlas.contains(y)) throw DomainError("Morse chart radius too large for the chart domain");
    y = atlas.canonical(y);
    const double model = f0 - 0.5 * v.head(p.index).squaredNorm() + 0.5 * v.tail(n - p.index).squaredNorm();
    rep.function_defect = std::max(rep.function_defect, std::abs(sys.value(y) - model));
    const Mat pulled = rep.linear_map.transpose() * atlas.metric(y) * rep.linear_map;
    rep.metric_defect = std::max(rep.metric_defect, (pulled - Mat::Identity(n, n)).cwiseAbs().maxCoeff());
  }
  return rep;
}

Mat unit_metric_operator(const Vec& e1, const Vec& e2, const Mat& g) {
  const Eigen::Index n = e1.size();
  const double c = e1.dot(g * e2);
  if (!(c > 0.0)) throw PreconditionError("metric operator needs <e1, e2> > 0");
  const double a1 = -(1.0 + c + c * c) / (1.0 + c);
  const double a2 = c / (1.0 + c);
  const double b1 = c / (1.0 + c);
  const double b2 = 1.0 / (c * (1.0 + c));
  const Vec ge1 = g * e1;
  const Vec ge2 = g * e2;
  return Mat::Identity(n, n) + e1 * (a1 * ge1 + a2 * ge2).transpose() + e2 * (b1 * ge1 + b2 * ge2).transpose();
}

Mat metric_operator(const Vec& v1, const Vec& v2, const Mat& g) {
  if (v1.size() != v2.size() || g.rows() != v1.size() || g.cols() != v1.size()) {
    throw PreconditionError("metric operator dimension mismatch");
  }
  const double n1 = std::sqrt(v1.dot(g * v1));
  const double n2 = std::sqrt(v2.dot(g * v2));
  if (!(n1 > 0.0) || !(n2 > 0.0)) throw PreconditionError("metric operator needs nonzero vectors");
  const Vec e1 = v1 / n1;
  const Vec e2 = v2 / n2;
  const Eigen::Index n = v1.size();
  if ((e1 - e2).norm() <= 1e-14 * std::max(1.0, e1.norm())) return Mat::Identity(n, n) * (n2 / n1);
  return (n2 / n1) * unit_metric_operator(e1, e2, g);
}

Mat metric_operator(const Vec& v1, const Vec& v2) {
  return metric_operator(v1, v2, Mat::Identity(v1.size(), v1.size()));
}

Mat gradient_like_to_metric(const std::function<Vec(const ManifoldPoint&)>& field, const MorseSystem& sys,
                            const ManifoldPoint& x) {
  const Eigen::Index n = x.coords.size();
  const Mat g = sys.atlas().metric(x);
  const Vec grad = sys.gradient(x);
  if (sys.gradient_norm(x) < kCriticalGradientTol) return Mat::Identity(n, n);
  const Vec xv = field(x);
  if (!(xv.dot(g * grad) > 0.0)) {
    throw PreconditionError("field is not gradient-like here: <X, grad f> <= 0 at a regular point");
  }
  return metric_operator(xv, grad, g);
}

}  // namespace morseflow
