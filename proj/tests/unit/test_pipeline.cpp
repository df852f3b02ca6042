#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "morseflow/pipeline.hpp"

namespace {

using namespace morseflow;
namespace fs = std::filesystem;

const char* kTorus = R"(
[manifold]
name = "flat-torus"
[flow]
abs_tol = 1e-10
rel_tol = 1e-10
[moduli]
mesh = 64
)";

const char* kEllipsoid = R"(
[manifold]
name = "ellipsoid-sphere"
[function.params]
a = 1.0
b = 2.0
c = 3.0
)";

const CheckVerdict* find_check(const RunReport& r, const std::string& name) {
  for (const auto& c : r.checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("morseflow_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

const RunReport& torus_report() {
  static const RunReport r = run_pipeline(parse_config(kTorus), Stage::homology, true);
  return r;
}

TEST(Config, ParsesEveryDocumentedKey) {
  const auto cfg = parse_config(R"(
[manifold]
name = "morse-local-model"
params = { dim_minus = 1, dim_plus = 2 }
[function.params]
value = 0.5
[flow]
abs_tol = 1e-9
rel_tol = 1e-8
max_time = 100
[moduli]
mesh = 32
bisect_tol = 1e-9
[levels]
mode = "fraction"
sign_fraction = 0.1
cap = 1.5
[orientation]
overrides = ["c0", 2]
[output]
report = "r.json"
csv_dir = "csv"
[checks]
chart_epsilon = 0.05
)");
  EXPECT_EQ(cfg.manifold, "morse-local-model");
  EXPECT_EQ(cfg.manifold_params.at("dim_plus"), 2.0);
  EXPECT_EQ(cfg.function_params.at("value"), 0.5);
  EXPECT_EQ(cfg.flow.abs_tol, 1e-9);
  EXPECT_EQ(cfg.moduli.flow.rel_tol, 1e-8);
  EXPECT_EQ(cfg.flow.max_time, 100.0);
  EXPECT_EQ(cfg.moduli.mesh, 32);
  EXPECT_EQ(cfg.moduli.bisect_tol, 1e-9);
  EXPECT_EQ(cfg.levels_mode, "fraction");
  EXPECT_EQ(cfg.moduli.sign_level_fraction, 0.1);
  EXPECT_EQ(cfg.level_cap, 1.5);
  EXPECT_EQ(cfg.orientation_overrides, (std::vector<std::string>{"c0", "2"}));
  EXPECT_EQ(cfg.report_path, "r.json");
  EXPECT_EQ(cfg.csv_dir, "csv");
  EXPECT_EQ(cfg.chart_epsilon, 0.05);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_config("[flow]\nabs_tolerance = 1e-9\n"), ConfigurationError);
  EXPECT_THROW(parse_config("[colour]\nx = 1\n"), ConfigurationError);
  EXPECT_THROW(parse_config("[flow]\nabs_tol = -1.0\n"), ConfigurationError);
  EXPECT_THROW(parse_config("[flow]\nrel_tol = \"tight\"\n"), ConfigurationError);
  EXPECT_THROW(parse_config("[moduli]\nmesh = 4\n"), ConfigurationError);
  EXPECT_THROW(parse_config("[moduli]\nmesh = 6.5\n"), ConfigurationError);
  EXPECT_THROW(parse_config("[levels]\nmode = \"random\"\n"), ConfigurationError);
  EXPECT_THROW(parse_config("[levels]\nsign_fraction = 0.1\n"), ConfigurationError);
  EXPECT_THROW(parse_config("[levels]\nmode = \"fraction\"\nsign_fraction = 0.7\n"), ConfigurationError);
  EXPECT_THROW(parse_config("[orientation]\noverrides = \"c0\"\n"), ConfigurationError);
  EXPECT_THROW(parse_config("this is = = not toml"), ConfigurationError);
  EXPECT_THROW(load_config("/nonexistent/morseflow.toml"), ConfigurationError);
}

TEST(Config, ShippedConfigsLoad) {
  for (const char* name : {"torus.toml", "ellipsoid.toml"}) {
    const auto cfg = load_config(std::string(MORSEFLOW_CONFIG_DIR) + "/" + name);
    EXPECT_EQ(cfg.moduli.mesh, 64);
  }
}

TEST(Pipeline, TorusEndToEnd) {
  const RunReport& r = torus_report();
  EXPECT_TRUE(r.ok()) << report_json(r, true);
  ASSERT_TRUE(r.homology.has_value());
  EXPECT_EQ(r.homology->betti, (std::vector<long>{1, 2, 1}));
  EXPECT_EQ(r.critical.size(), 4u);
  EXPECT_EQ(r.moduli.size(), 4u);
  EXPECT_EQ(r.curves.size(), 1u);
  EXPECT_EQ(r.poset.size(), 5u);
  for (const char* name : {"critical_points_found", "endpoint_identity", "boundary_orientation", "endpoint_shadowing",
                           "energy_identity", "faces_consistent", "disk_euler", "sphere_boundary_euler", "d_squared",
                           "euler_characteristic"}) {
    const CheckVerdict* c = find_check(r, name);
    ASSERT_NE(c, nullptr) << name;
    EXPECT_EQ(c->status, CheckStatus::pass) << name << ": " << c->detail;
  }
  // The flat metric is locally trivial up to the quartic remainder.
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Pipeline, EllipsoidEndToEnd) {
  const RunReport r = run_pipeline(parse_config(kEllipsoid), Stage::homology, true);
  EXPECT_TRUE(r.ok()) << report_json(r, true);
  ASSERT_TRUE(r.homology.has_value());
  EXPECT_EQ(r.homology->betti, (std::vector<long>{1, 0, 1}));
  ASSERT_TRUE(r.complex.has_value());
  EXPECT_NE(r.complex->d(1), IntMat::Zero(2, 2));
  EXPECT_EQ(find_check(r, "d_squared")->status, CheckStatus::pass);
  // Stereographic metric: the warning is expected and does not fail the run.
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Pipeline, StagePrefixes) {
  const auto cfg = parse_config(kTorus);
  const RunReport cp = run_pipeline(cfg, Stage::critical_points, true);
  EXPECT_EQ(cp.critical.size(), 4u);
  EXPECT_TRUE(cp.moduli.empty());
  EXPECT_FALSE(cp.homology.has_value());
  EXPECT_TRUE(cp.ok());
  const RunReport mod = run_pipeline(cfg, Stage::moduli, true);
  EXPECT_EQ(mod.moduli.size(), 4u);
  EXPECT_TRUE(mod.poset.empty());
  const RunReport st = run_pipeline(cfg, Stage::strata, true);
  EXPECT_FALSE(st.strata.empty());
  EXPECT_FALSE(st.complex.has_value());
}

TEST(Pipeline, JsonIsDeterministic) {
  const auto cfg = parse_config(kTorus);
  const std::string a = report_json(run_pipeline(cfg, Stage::homology, true), true);
  const std::string b = report_json(run_pipeline(cfg, Stage::homology, true), true);
  EXPECT_EQ(a, b);
  const auto j = nlohmann::json::parse(a);
  EXPECT_EQ(j["schema"], RunReport::kSchema);
  EXPECT_FALSE(j.contains("timings"));
  EXPECT_EQ(j["homology"]["betti"], nlohmann::json({1, 2, 1}));
  EXPECT_TRUE(nlohmann::json::parse(report_json(torus_report(), false)).contains("timings"));
}

TEST(Pipeline, OverridesFlipSignsButNotHomology) {
  auto cfg = parse_config(kTorus);
  cfg.orientation_overrides = {"c0"};
  const RunReport r = run_pipeline(cfg, Stage::homology, true);
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.homology->betti, torus_report().homology->betti);
  for (std::size_t i = 0; i < r.moduli.size(); ++i) {
    const auto& a = r.moduli[i];
    const auto& b = torus_report().moduli[i];
    ASSERT_EQ(a.classes.size(), b.classes.size());
    for (std::size_t k = 0; k < a.classes.size(); ++k) {
      EXPECT_EQ(a.classes[k].sign, a.p == 0 ? -b.classes[k].sign : b.classes[k].sign);
    }
  }
  cfg.orientation_overrides = {"nobody"};
  const RunReport bad = run_pipeline(cfg, Stage::critical_points, true);
  EXPECT_FALSE(bad.ok());
  ASSERT_FALSE(bad.errors.empty());
  EXPECT_EQ(bad.errors[0].rfind("critical_points: ", 0), 0u);
}

TEST(Pipeline, ModuleErrorsAreRecorded) {
  auto cfg = parse_config(kTorus);
  cfg.manifold = "mobius-strip";
  const RunReport r = run_pipeline(cfg, Stage::homology, true);
  EXPECT_FALSE(r.ok());
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].rfind("critical_points: ", 0), 0u);
  EXPECT_TRUE(r.critical.empty());
}

TEST(Pipeline, LevelCapDropsTheTop) {
  auto cfg = parse_config(kTorus);
  cfg.level_cap = 1.0;
  const RunReport r = run_pipeline(cfg, Stage::homology, true);
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.homology->betti, (std::vector<long>{1, 2}));
}

TEST(Pipeline, WritesReportAndCsv) {
  const fs::path dir = scratch_dir("out");
  auto cfg = parse_config(kTorus);
  cfg.report_path = (dir / "report.json").string();
  cfg.csv_dir = (dir / "csv").string();
  fs::create_directories(dir);
  const RunReport r = run_pipeline(cfg, Stage::homology, true);
  EXPECT_TRUE(r.ok());
  std::ifstream in(cfg.report_path);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(nlohmann::json::parse(ss.str())["ok"], true);
  for (const char* f : {"critical_points.csv", "classes.csv", "curve_0_3.csv"}) {
    EXPECT_TRUE(fs::exists(dir / "csv" / f)) << f;
  }
  std::ifstream classes(dir / "csv" / "classes.csv");
  std::string header;
  std::getline(classes, header);
  EXPECT_EQ(header, "p,q,class,parameter,sign,chart,coords");
  fs::remove_all(dir);
}

TEST(Pipeline, UnwritableOutputIsAnError) {
  auto cfg = parse_config(kTorus);
  cfg.report_path = "/nonexistent/dir/report.json";
  const RunReport r = run_pipeline(cfg, Stage::critical_points, true);
  EXPECT_FALSE(r.ok());
}

}  // namespace
