// Acceptance suite: one test per criterion, reported as "criterion N: PASS|FAIL".
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "morseflow/corner.hpp"
#include "morseflow/cp2gap.hpp"
#include "morseflow/homology.hpp"
#include "morseflow/pipeline.hpp"
#include "morseflow/strata.hpp"

namespace {

using namespace morseflow;
using namespace mftest;

IntegratorOptions tight() {
  IntegratorOptions o;
  o.abs_tol = 1e-12;
  o.rel_tol = 1e-12;
  return o;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const ModuliEntry* find_pair(const RunReport& r, int p, int q) {
  for (const auto& m : r.moduli) {
    if (m.p == p && m.q == q) return &m;
  }
  return nullptr;
}

TEST(Criterion, C1_TorusPipeline) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunReport r = run_pipeline(load_config(std::string(MORSEFLOW_CONFIG_DIR) + "/torus.toml"));
  const double elapsed = seconds_since(t0);
  EXPECT_TRUE(r.ok()) << report_json(r, true);
  ASSERT_EQ(r.critical.size(), 4u);
  std::multiset<int> indices;
  for (const auto& c : r.critical) indices.insert(c.point.index);
  EXPECT_EQ(indices, (std::multiset<int>{0, 1, 1, 2}));
  const double expected[4][2] = {{0, 0}, {0, kPi}, {kPi, 0}, {kPi, kPi}};
  for (int i = 0; i < 4; ++i) {
    const auto& x = r.critical[i].point.position;
    EXPECT_LT(torus().atlas().displacement(x, pt(expected[i][0], expected[i][1])).norm(), 1e-8) << i;
  }
  for (auto [p, q] : {std::pair{kP, kR}, {kP, kS}, {kR, kQ}, {kS, kQ}}) {
    const ModuliEntry* m = find_pair(r, p, q);
    ASSERT_NE(m, nullptr) << p << "," << q;
    EXPECT_EQ(m->classes.size(), 2u);
    EXPECT_EQ(m->signed_count, 0);
  }
  ASSERT_TRUE(r.complex.has_value());
  EXPECT_TRUE(verify_d_squared(*r.complex).pass);
  ASSERT_TRUE(r.homology.has_value());
  EXPECT_EQ(r.homology->betti, (std::vector<long>{1, 2, 1}));
  EXPECT_LT(elapsed, 60.0);
  std::printf("  torus pipeline %.2f s\n", elapsed);
}

TEST(Criterion, C2_TorusStratification) {
  const ModuliData data = collect_moduli_data(torus_solver());
  const SuccessionPoset poset(data);
  const auto st = stratification(SpaceTag::Dbar, poset, data, kP);
  EXPECT_EQ(st.components_at(0), 1);
  EXPECT_EQ(st.components_at(1), 8);
  EXPECT_EQ(st.components_at(2), 8);
  for (const auto& c : st.cells) {
    EXPECT_EQ(c.dim, 2 - c.k);
  }
  EXPECT_EQ(st.boundary_euler_characteristic(), 0);
  EXPECT_EQ(st.euler_characteristic(), 1);
  EXPECT_TRUE(st.faces_consistent());
  for (std::size_t c = 0; c < st.cells.size(); ++c) {
    if (st.cells[c].dim == 0) EXPECT_EQ(st.faces[c].size(), 2u) << c;
  }
}

TEST(Criterion, C3_EndpointSums) {
  const ModuliCurve& torus_curve = torus_solver().moduli_curve(kP, kQ);
  ASSERT_EQ(torus_curve.components.size(), 4u);
  for (const auto& comp : torus_curve.components) {
    EXPECT_EQ(comp.endpoints.size(), 2u);
    EXPECT_EQ(comp.weighted_sum(), 0);
  }
  int pairs = 0;
  for (const auto& top : ellipsoid_crit()) {
    if (top.index != 2) continue;
    for (const auto& bottom : ellipsoid_crit()) {
      if (bottom.index != 0) continue;
      const ModuliCurve& c = ellipsoid_solver().moduli_curve(top.id, bottom.id);
      EXPECT_FALSE(c.components.empty());
      for (const auto& comp : c.components) {
        EXPECT_EQ(comp.endpoints.size(), 2u);
        EXPECT_EQ(comp.weighted_sum(), 0) << top.label << " -> " << bottom.label;
      }
      ++pairs;
    }
  }
  EXPECT_EQ(pairs, 4);
}

TEST(Criterion, C4_EllipsoidPipeline) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunReport r = run_pipeline(load_config(std::string(MORSEFLOW_CONFIG_DIR) + "/ellipsoid.toml"));
  const double elapsed = seconds_since(t0);
  EXPECT_TRUE(r.ok()) << report_json(r, true);
  ASSERT_EQ(r.critical.size(), 6u);
  std::multiset<int> indices;
  for (const auto& c : r.critical) indices.insert(c.point.index);
  EXPECT_EQ(indices, (std::multiset<int>{0, 0, 1, 1, 2, 2}));
  int max_saddle = 0;
  for (const auto& m : r.moduli) {
    if (r.critical[m.p].point.index == 2) {
      EXPECT_EQ(std::abs(m.signed_count), 1) << m.p << "," << m.q;
      ++max_saddle;
    }
  }
  EXPECT_EQ(max_saddle, 4);
  ASSERT_TRUE(r.complex.has_value());
  EXPECT_TRUE(verify_d_squared(*r.complex).pass);
  ASSERT_TRUE(r.homology.has_value());
  EXPECT_EQ(r.homology->betti, (std::vector<long>{1, 0, 1}));
  EXPECT_LT(elapsed, 120.0);
  std::printf("  ellipsoid pipeline %.2f s\n", elapsed);
}

TEST(Criterion, C5_Cp2Counterexample) {
  std::mt19937_64 rng(501);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double r = 0.05 + 0.9 * u(rng), rho = std::sqrt(1.0 + r * r);
    const double a = 2 * kPi * u(rng), b = 2 * kPi * u(rng);
    Vec v(4);
    v << r * std::cos(a), r * std::sin(a), rho * std::cos(b), rho * std::sin(b);
    worst = std::max(worst, (cp2_connect_levels(v) - cp2_connect_levels_numeric(cp2(), v, tight())).norm());
  }
  EXPECT_LT(worst, 1e-6);
  std::printf("  connect vs integration %.3e over 200 points\n", worst);

  const auto rows = c1_blowup_scan(1.0, 0.0, blowup_grid(1e-6));
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_NEAR(rows.back().s, 1e-6, 1e-18);
  for (const auto& row : rows) EXPECT_NEAR(row.v5, 1.0, 1e-9) << row.s;
  // A C1 collar would force v5 -> 0 as s -> 0; the limit stays at 1.
  EXPECT_GT(std::abs(rows.back().limit - 0.0), 0.5);
}

TEST(Criterion, C6_CornerCharts) {
  for (CornerVariant v :
       {CornerVariant::p_corner, CornerVariant::q_plus, CornerVariant::q_minus, CornerVariant::collar}) {
    const auto sum = corner_check(corner_chart(v, 1.0), 1000);
    EXPECT_EQ(sum.samples, 1000);
    EXPECT_LT(sum.max_round_trip_error, 1e-12) << to_string(v);
    EXPECT_LT(sum.max_column_error, 1e-6) << to_string(v);
    EXPECT_GE(sum.min_singular_value, 0.5) << to_string(v);
    std::printf("  %-8s round_trip %.2e columns %.2e sigma_min %.3f\n", std::string(to_string(v)).c_str(),
                sum.max_round_trip_error, sum.max_column_error, sum.min_singular_value);
  }
}

TEST(Criterion, C7_ClosedFormFlows) {
  const MorseSystem local = make_builtin_system("morse-local-model");
  std::mt19937_64 rng(701);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst_local = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double t = 5.0 * u(rng);
    // Keep the expanding coordinate inside the model box for the whole run.
    Vec x(2);
    x << 0.5 * u(rng) * std::exp(-std::abs(t)), 0.5 * u(rng) * std::exp(-std::abs(t));
    const auto tr = integrate(local, {0, x}, StopCondition::at_time(std::abs(t)), tight(), nullptr, t < 0 ? -1 : 1);
    ASSERT_EQ(tr.status, StopReason::reached_time);
    Vec exact(2);
    exact << std::exp(t) * x[0], std::exp(-t) * x[1];
    worst_local = std::max(worst_local, (tr.end().coords - exact).lpNorm<Eigen::Infinity>());
  }
  EXPECT_LT(worst_local, 1e-8);

  double worst_cp2 = 0.0;
  int compared = 0;
  for (int i = 0; i < 200 && compared < 100; ++i) {
    Vec v(4);
    v << 0.5 * u(rng), 0.5 * u(rng), 0.5 * u(rng), 0.5 * u(rng);
    const double t = 0.4 * u(rng);
    Vec exact;
    try {
      exact = cp2_flow(v, t);
    } catch (const ChartExitError&) {
      continue;
    }
    const auto tr = integrate(cp2(), {0, v}, StopCondition::at_time(std::abs(t)), tight(), nullptr, t < 0 ? -1 : 1);
    worst_cp2 = std::max(worst_cp2, (tr.end().coords - exact).lpNorm<Eigen::Infinity>());
    ++compared;
  }
  EXPECT_EQ(compared, 100);
  EXPECT_LT(worst_cp2, 1e-8);
  std::printf("  local model %.2e, cp2 %.2e\n", worst_local, worst_cp2);
}

TEST(Criterion, C8_MetricOperator) {
  std::mt19937_64 rng(801);
  std::normal_distribution<double> n(0.0, 1.0);
  int tested = 0;
  double sym = 0.0, fit = 0.0, min_eig = 1e300;
  while (tested < 1000) {
    const int dim = 2 + tested % 3;
    Vec v1(dim), v2(dim);
    for (int k = 0; k < dim; ++k) v1[k] = n(rng), v2[k] = n(rng);
    if (v1.dot(v2) <= 1e-3) continue;
    const Mat a = metric_operator(v1, v2);
    sym = std::max(sym, (a - a.transpose()).cwiseAbs().maxCoeff());
    fit = std::max(fit, (a * v1 - v2).norm());
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Mat>(0.5 * (a + a.transpose())).eigenvalues().minCoeff());
    EXPECT_EQ(metric_operator(v1, v1), Mat::Identity(dim, dim));
    ++tested;
  }
  EXPECT_LT(sym, 1e-12);
  EXPECT_LT(fit, 1e-10);
  EXPECT_GT(min_eig, 0.0);
  std::printf("  symmetry %.2e fit %.2e min eigenvalue %.3e\n", sym, fit, min_eig);
}

TEST(Criterion, C9_PropertySuites) {
  // Energy identity.
  for (const char* name : {"flat-torus", "ellipsoid-sphere", "morse-local-model", "cp2-chart"}) {
    const MorseSystem sys = make_builtin_system(name);
    const auto crit = find_critical_points(sys);
    const bool open = std::string(name) == "morse-local-model" || std::string(name) == "cp2-chart";
    double worst = 0.0;
    for (const auto& x : random_points(sys, 100, 901)) {
      const auto tr = integrate(sys, x, open ? StopCondition::at_time(0.3) : StopCondition{}, {}, &crit);
      const double drop = sys.value(tr.start()) - sys.value(tr.end());
      worst = std::max(worst, std::abs(tr.energy - drop) / drop);
    }
    EXPECT_LT(worst, 1e-6) << name;
  }

  // Flow-map derivative against finite differences.
  std::mt19937_64 rng(902);
  std::uniform_real_distribution<double> ang(0.2, kPi / 2 - 0.2);
  for (int i = 0; i < 20; ++i) {
    Vec dir(2);
    const double th = ang(rng) + (kPi / 2) * (i % 4);
    dir << std::cos(th), std::sin(th);
    const ManifoldPoint x = on_level_along_ray(torus(), pt(0.0, 0.0), dir, 1.0, 2.5);
    const auto r = flow_map(torus(), x, 1.0, -1.0, tight(), &torus_crit());
    EXPECT_LT(flow_map_fd_error(torus(), x, -1.0, r.derivative, tight()), 1e-4);
  }

  // Sign invariance under level choice, mesh refinement and tightened tolerances.
  ModuliOptions fine;
  fine.mesh = 128;
  fine.bisect_tol = 1e-11;
  fine.flow.abs_tol = 1e-11;
  fine.flow.rel_tol = 1e-11;
  for (const bool on_torus : {true, false}) {
    ModuliSolver& base = on_torus ? torus_solver() : ellipsoid_solver();
    ModuliSolver refined(on_torus ? torus() : ellipsoid(), on_torus ? torus_crit() : ellipsoid_crit(), fine);
    for (const auto& p : base.critical()) {
      for (const auto& q : base.critical()) {
        if (p.index - q.index != 1 || p.value <= q.value) continue;
        const auto& a = base.connecting_orbits(p.id, q.id);
        const auto& b = refined.connecting_orbits(p.id, q.id);
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t k = 0; k < a.size(); ++k) {
          EXPECT_EQ(a[k].sign, b[k].sign);
          const double gap = p.value - q.value;
          EXPECT_EQ(base.orientation_sign(a[k], 0.1 * gap), a[k].sign);
          EXPECT_EQ(base.orientation_sign(a[k], 0.5 * gap), a[k].sign);
        }
      }
    }
  }

  // Orientation flip conjugates the boundary by signs and leaves homology alone.
  auto flipped = ellipsoid_crit();
  std::vector<int> ids;
  for (const auto& c : flipped) {
    if (c.index > 0 && c.id % 2 == 1) ids.push_back(c.id);
  }
  flip_orientation(flipped, ids);
  ModuliSolver other(ellipsoid(), flipped);
  const auto cx0 = build_complex(ellipsoid_crit(), compute_signed_counts(ellipsoid_solver()));
  const auto cx1 = build_complex(flipped, compute_signed_counts(other));
  auto sign = [&](int id) { return std::count(ids.begin(), ids.end(), id) ? -1 : 1; };
  for (int k = 1; k <= cx1.top_degree(); ++k) {
    for (Eigen::Index i = 0; i < cx1.d(k).rows(); ++i) {
      for (Eigen::Index j = 0; j < cx1.d(k).cols(); ++j) {
        EXPECT_EQ(cx1.d(k)(i, j), sign(cx1.generators[k][j]) * sign(cx1.generators[k - 1][i]) * cx0.d(k)(i, j));
      }
    }
  }
  EXPECT_EQ(smith_homology(cx0).betti, smith_homology(cx1).betti);

  // Deterministic report.
  const auto cfg = load_config(std::string(MORSEFLOW_CONFIG_DIR) + "/torus.toml");
  EXPECT_EQ(report_json(run_pipeline(cfg), true), report_json(run_pipeline(cfg), true));
}

class CriterionPrinter : public ::testing::EmptyTestEventListener {
 public:
  void OnTestEnd(const ::testing::TestInfo& info) override {
    const std::string name = info.name();
    std::printf("criterion %c: %s  (%s)\n", name[1], info.result()->Passed() ? "PASS" : "FAIL", name.c_str() + 3);
    std::fflush(stdout);
  }
};

}  // namespace

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  ::testing::UnitTest::GetInstance()->listeners().Append(new CriterionPrinter);
  return RUN_ALL_TESTS();
}
