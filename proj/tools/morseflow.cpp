#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "morseflow/corner.hpp"
#include "morseflow/cp2gap.hpp"
#include "morseflow/pipeline.hpp"

namespace {

using namespace morseflow;

struct PipelineArgs {
  std::string config;
  std::string report;
  std::string csv_dir;
  bool normalized = false;
};

void add_pipeline(CLI::App& app, PipelineArgs& args) {
  app.add_option("-c,--config", args.config, "TOML run configuration")->required()->check(CLI::ExistingFile);
  app.add_option("--report", args.report, "write the JSON report here instead of stdout");
  app.add_option("--csv-dir", args.csv_dir, "directory for CSV dumps");
  app.add_flag("--normalized", args.normalized, "omit timings so identical runs give identical reports");
}

int run_stage(const PipelineArgs& args, Stage stage) {
  PipelineConfig cfg = load_config(args.config);
  if (!args.report.empty()) cfg.report_path = args.report;
  if (!args.csv_dir.empty()) cfg.csv_dir = args.csv_dir;
  const RunReport rep = run_pipeline(cfg, stage, args.normalized);
  if (cfg.report_path.empty()) {
    std::cout << report_json(rep, args.normalized) << '\n';
  } else {
    for (const auto& c : rep.checks) std::cout << std::left << std::setw(24) << c.name << to_string(c.status) << '\n';
    if (rep.homology) {
      std::cout << "betti";
      for (long b : rep.homology->betti) std::cout << ' ' << b;
      std::cout << '\n';
    }
  }
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& e : rep.errors) std::cerr << "error: " << e << '\n';
  return rep.ok() ? 0 : 1;
}

int corner_check_cmd(double eps, int samples, const std::string& variant) {
  std::vector<CornerVariant> variants;
  if (variant == "all") {
    variants = {CornerVariant::p_corner, CornerVariant::q_plus, CornerVariant::q_minus, CornerVariant::collar};
  } else {
    variants = {corner_variant_from_string(variant)};
  }
  bool ok = true;
  std::cout << std::setprecision(6);
  for (CornerVariant v : variants) {
    const CornerCheckSummary s = corner_check(corner_chart(v, eps), samples);
    // The 0.5 bound on the smallest singular value is stated for eps = 1.
    const bool sv_ok = eps == 1.0 ? s.min_singular_value >= 0.5 : s.min_singular_value > 0.0;
    const bool pass = s.max_round_trip_error < 1e-12 && s.max_column_error < 1e-6 && sv_ok;
    ok = ok && pass;
    std::cout << std::left << std::setw(8) << to_string(v) << " round_trip " << s.max_round_trip_error << "  columns "
              << s.max_column_error << "  min_sv " << s.min_singular_value << "  " << (pass ? "pass" : "fail") << '\n';
  }
  return ok ? 0 : 1;
}

int blowup_cmd(double a, double b, double s_min, double s_max, double phi, const std::string& csv) {
  const auto rows = c1_blowup_scan(a, b, blowup_grid(s_min, s_max), phi);
  bool constant = true;
  for (const auto& r : rows) constant = constant && std::abs(r.v5 - r.limit) <= 1e-9;
  if (csv.empty()) {
    write_blowup_csv(std::cout, rows);
  } else {
    std::ofstream out(csv);
    if (!out) throw Error("cannot write " + csv);
    write_blowup_csv(out, rows);
  }
  const double limit = rows.front().limit;
  std::cerr << std::setprecision(10) << "limit L = " << limit << (constant ? " (v5 constant in s)" : " (v5 varies)")
            << "; collar boundary value 0 " << (limit != 0.0 ? "contradicted" : "not contradicted") << '\n';
  return constant && limit != 0.0 ? 0 : 1;
}

int local_model_cmd(double t, const std::vector<double>& from) {
  const int n = static_cast<int>(from.size());
  if (n != 2) throw PreconditionError("local-model: --from takes two coordinates (v1, v2)");
  const MorseSystem sys = make_builtin_system("morse-local-model", {{"dim_minus", 1}, {"dim_plus", 1}, {"radius", 1e6}});
  Vec x(2);
  x << from[0], from[1];
  const int dir = t >= 0.0 ? 1 : -1;
  IntegratorOptions opts;
  opts.abs_tol = 1e-13;
  opts.rel_tol = 1e-13;
  const Trajectory tr = integrate(sys, ManifoldPoint{0, x}, StopCondition::at_time(std::abs(t)), opts, nullptr, dir);
  Vec exact(2);
  exact << std::exp(t) * x[0], std::exp(-t) * x[1];
  const double err = (tr.end().coords - exact).lpNorm<Eigen::Infinity>();
  std::cout << std::setprecision(12) << "integrated " << tr.end().coords.transpose() << "\nclosed form "
            << exact.transpose() << "\nmax error " << err << '\n';
  return err < 1e-8 ? 0 : 1;
}

int trajectory_cmd(const std::string& manifold, const std::vector<double>& from, int chart,
                   std::optional<double> level, std::optional<double> time, const std::string& csv) {
  const MorseSystem sys = make_builtin_system(manifold);
  Vec x(static_cast<Eigen::Index>(from.size()));
  for (std::size_t i = 0; i < from.size(); ++i) x[static_cast<Eigen::Index>(i)] = from[i];
  StopCondition stop;
  if (level) stop.level = *level;
  if (time) stop.time = *time;
  const auto crit = find_critical_points(sys);
  const Trajectory tr = integrate(sys, ManifoldPoint{chart, x}, stop, {}, &crit);
  if (csv.empty()) {
    write_trajectory_csv(std::cout, tr);
  } else {
    std::ofstream out(csv);
    if (!out) throw Error("cannot write " + csv);
    write_trajectory_csv(out, tr);
  }
  std::cerr << "status " << to_string(tr.status) << ", t = " << tr.end_time() << ", energy " << tr.energy << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Morse homology from gradient flow lines"};
  app.require_subcommand(1);

  PipelineArgs cp_args, mod_args, str_args, hom_args;
  add_pipeline(*app.add_subcommand("critical-points", "find and classify critical points"), cp_args);
  add_pipeline(*app.add_subcommand("moduli", "connecting orbits, signs and moduli curves"), mod_args);
  add_pipeline(*app.add_subcommand("strata", "succession poset and stratifications"), str_args);
  add_pipeline(*app.add_subcommand("homology", "chain complex and integer homology"), hom_args);

  double eps = 1.0;
  int samples = 1000;
  std::string variant = "all";
  auto* corner = app.add_subcommand("corner-check", "round trips and boundary derivatives of corner charts");
  corner->add_option("--epsilon", eps, "level of the local model")->check(CLI::PositiveNumber);
  corner->add_option("--samples", samples, "random round-trip samples")->check(CLI::PositiveNumber);
  corner->add_option("--variant", variant, "p, q+, q-, collar or all");

  double a = 1.0, b = 0.0, s_min = 1e-6, s_max = 0.1, phi = 0.0;
  std::string blowup_csv;
  auto* blowup = app.add_subcommand("cp2-blowup", "collar coordinate along curves into the corner");
  blowup->add_option("--a", a, "v1 = a s");
  blowup->add_option("--b", b, "v2 = b s^2");
  blowup->add_option("--s-min", s_min, "smallest s")->check(CLI::PositiveNumber);
  blowup->add_option("--s-max", s_max, "largest s")->check(CLI::PositiveNumber);
  blowup->add_option("--phi", phi, "angle of (v3, v4)");
  blowup->add_option("--csv", blowup_csv, "output file (default stdout)");

  double t = std::log(2.0);
  std::vector<double> from = {1.0, 1.0};
  auto* local = app.add_subcommand("local-model", "integrator against the closed-form local flow");
  local->add_option("--t", t, "flow time");
  local->add_option("--from", from, "start point v1,v2")->delimiter(',');

  std::string manifold = "flat-torus", traj_csv;
  std::vector<double> traj_from;
  int chart = 0;
  std::optional<double> level, time;
  auto* traj = app.add_subcommand("trajectory", "integrate one flow line and dump it as CSV");
  traj->add_option("--manifold", manifold, "built-in manifold");
  traj->add_option("--from", traj_from, "start coordinates")->delimiter(',')->required();
  traj->add_option("--chart", chart, "chart of the start point");
  traj->add_option("--level", level, "stop at this level");
  traj->add_option("--time", time, "stop at this time");
  traj->add_option("--csv", traj_csv, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand("critical-points")) return run_stage(cp_args, Stage::critical_points);
    if (app.got_subcommand("moduli")) return run_stage(mod_args, Stage::moduli);
    if (app.got_subcommand("strata")) return run_stage(str_args, Stage::strata);
    if (app.got_subcommand("homology")) return run_stage(hom_args, Stage::homology);
    if (app.got_subcommand(corner)) return corner_check_cmd(eps, samples, variant);
    if (app.got_subcommand(blowup)) return blowup_cmd(a, b, s_min, s_max, phi, blowup_csv);
    if (app.got_subcommand(local)) return local_model_cmd(t, from);
    if (app.got_subcommand(traj)) return trajectory_cmd(manifold, traj_from, chart, level, time, traj_csv);
  } catch (const ConfigurationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
