#include "morseflow/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include <toml.hpp>

namespace morseflow {

namespace {

[[noreturn]] void config_error(const std::string& what) { throw ConfigurationError("config: " + what); }

double number(const toml::node& n, const std::string& key) {
  if (auto v = n.value<double>()) return *v;
  config_error(key + " must be a number");
}

ParamTable param_table(const toml::node& n, const std::string& key) {
  const toml::table* t = n.as_table();
  if (t == nullptr) config_error(key + " must be a table");
  ParamTable out;
  for (const auto& [k, v] : *t) out[std::string(k.str())] = number(v, key + "." + std::string(k.str()));
  return out;
}

// Visit key = value pairs of a table, rejecting keys without a handler.
void each(const toml::node& n, const std::string& section,
          const std::map<std::string, std::function<void(const toml::node&)>>& handlers) {
  const toml::table* t = n.as_table();
  if (t == nullptr) config_error(section + " must be a table");
  for (const auto& [k, v] : *t) {
    const std::string key(k.str());
    auto h = handlers.find(key);
    if (h == handlers.end()) config_error("unknown key " + (section.empty() ? key : section + "." + key));
    h->second(v);
  }
}

std::string text(const toml::node& n, const std::string& key) {
  if (auto v = n.value<std::string>()) return *v;
  config_error(key + " must be a string");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<int> resolve_overrides(const std::vector<CriticalPoint>& crit, const std::vector<std::string>& names) {
  std::vector<int> ids;
  for (const std::string& name : names) {
    int found = -1;
    for (const auto& c : crit) {
      if (c.label == name || std::to_string(c.id) == name) found = c.id;
    }
    if (found < 0) throw ConfigurationError("orientation override '" + name + "' names no critical point");
    ids.push_back(found);
  }
  return ids;
}

}  // namespace

void PipelineConfig::validate() const {
  auto positive = [](double v, const char* key) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigurationError(std::string("config: ") + key + " must be positive");
  };
  positive(flow.abs_tol, "flow.abs_tol");
  positive(flow.rel_tol, "flow.rel_tol");
  positive(flow.max_time, "flow.max_time");
  positive(moduli.bisect_tol, "moduli.bisect_tol");
  positive(chart_epsilon, "checks.chart_epsilon");
  if (moduli.mesh < 8) throw ConfigurationError("config: moduli.mesh must be at least 8");
  if (levels_mode != "auto" && levels_mode != "fraction") {
    throw ConfigurationError("config: levels.mode must be \"auto\" or \"fraction\"");
  }
  if (!(moduli.sign_level_fraction > 0.0 && moduli.sign_level_fraction < 0.5)) {
    throw ConfigurationError("config: levels.sign_fraction must lie in (0, 0.5)");
  }
}

PipelineConfig parse_config(const std::string& toml_text) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << e.description() << " at line " << e.source().begin.line;
    config_error(os.str());
  }
  PipelineConfig cfg;
  std::optional<double> sign_fraction;
  each(root, "",
       {
           {"manifold",
            [&](const toml::node& n) {
              each(n, "manifold",
                   {{"name", [&](const toml::node& v) { cfg.manifold = text(v, "manifold.name"); }},
                    {"params", [&](const toml::node& v) { cfg.manifold_params = param_table(v, "manifold.params"); }}});
            }},
           {"function",
            [&](const toml::node& n) {
              each(n, "function",
                   {{"params", [&](const toml::node& v) { cfg.function_params = param_table(v, "function.params"); }}});
            }},
           {"flow",
            [&](const toml::node& n) {
              each(n, "flow",
                   {{"abs_tol", [&](const toml::node& v) { cfg.flow.abs_tol = number(v, "flow.abs_tol"); }},
                    {"rel_tol", [&](const toml::node& v) { cfg.flow.rel_tol = number(v, "flow.rel_tol"); }},
                    {"max_time", [&](const toml::node& v) { cfg.flow.max_time = number(v, "flow.max_time"); }}});
            }},
           {"moduli",
            [&](const toml::node& n) {
              each(n, "moduli",
                   {{"mesh",
                     [&](const toml::node& v) {
                       auto m = v.value<std::int64_t>();
                       if (!m) config_error("moduli.mesh must be an integer");
                       cfg.moduli.mesh = static_cast<int>(*m);
                     }},
                    {"bisect_tol", [&](const toml::node& v) { cfg.moduli.bisect_tol = number(v, "moduli.bisect_tol"); }}});
            }},
           {"levels",
            [&](const toml::node& n) {
              each(n, "levels",
                   {{"mode", [&](const toml::node& v) { cfg.levels_mode = text(v, "levels.mode"); }},
                    {"sign_fraction", [&](const toml::node& v) { sign_fraction = number(v, "levels.sign_fraction"); }},
                    {"cap", [&](const toml::node& v) { cfg.level_cap = number(v, "levels.cap"); }}});
            }},
           {"orientation",
            [&](const toml::node& n) {
              each(n, "orientation", {{"overrides", [&](const toml::node& v) {
                                         const toml::array* a = v.as_array();
                                         if (a == nullptr) config_error("orientation.overrides must be an array");
                                         for (const auto& e : *a) {
                                           if (auto s = e.value<std::string>()) {
                                             cfg.orientation_overrides.push_back(*s);
                                           } else if (auto i = e.value<std::int64_t>()) {
                                             cfg.orientation_overrides.push_back(std::to_string(*i));
                                           } else {
                                             config_error("orientation.overrides entries must be labels or ids");
                                           }
                                         }
                                       }}});
            }},
           {"output",
            [&](const toml::node& n) {
              each(n, "output",
                   {{"report", [&](const toml::node& v) { cfg.report_path = text(v, "output.report"); }},
                    {"csv_dir", [&](const toml::node& v) { cfg.csv_dir = text(v, "output.csv_dir"); }}});
            }},
           {"checks",
            [&](const toml::node& n) {
              each(n, "checks",
                   {{"chart_epsilon", [&](const toml::node& v) { cfg.chart_epsilon = number(v, "checks.chart_epsilon"); }}});
            }},
       });
  cfg.moduli.flow = cfg.flow;
  if (sign_fraction) {
    if (cfg.levels_mode != "fraction") config_error("levels.sign_fraction needs levels.mode = \"fraction\"");
    cfg.moduli.sign_level_fraction = *sign_fraction;
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("config: cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str());
}

std::string_view to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "fail";
    case CheckStatus::skipped: return "skipped";
  }
  return "?";
}

bool RunReport::ok() const {
  if (!errors.empty()) return false;
  for (const auto& c : checks) {
    if (c.status == CheckStatus::fail) return false;
  }
  return true;
}

namespace {

void add_check(RunReport& rep, std::string name, bool pass, std::string detail) {
  rep.checks.push_back({std::move(name), pass ? CheckStatus::pass : CheckStatus::fail, std::move(detail)});
}

void skip_check(RunReport& rep, std::string name, std::string reason) {
  rep.checks.push_back({std::move(name), CheckStatus::skipped, std::move(reason)});
}

StrataEntry summarize(const Stratification& s) {
  StrataEntry e;
  e.tag = s.tag;
  e.head = s.head;
  e.tail = s.tail;
  e.total_dim = s.total_dim;
  e.complete = s.cells_complete;
  for (int k = 0; k <= s.max_k(); ++k) e.components_by_k.push_back(s.components_at(k));
  if (s.cells_complete) {
    e.euler = s.euler_characteristic();
    e.boundary_euler = s.boundary_euler_characteristic();
    e.faces_consistent = s.faces_consistent();
  }
  return e;
}

// Energy identity on a few trajectories leaving each non-minimum.
void energy_check(RunReport& rep, const MorseSystem& sys, ModuliSolver& solver) {
  double worst = 0.0;
  int count = 0;
  for (const auto& c : solver.critical()) {
    if (c.index == 0 || c.index > 2) continue;
    const double a = solver.level_below(c.id);
    const SphereSampling s = solver.descending_sphere(c.id, a, 8);
    for (const auto& pt : s.points) {
      if (!pt.reached) continue;
      const Trajectory tr = integrate(sys, pt.image, StopCondition{}, solver.options().flow, &solver.critical());
      const double drop = sys.function().value(tr.start()) - sys.function().value(tr.end());
      if (!(drop > 0.0)) continue;
      worst = std::max(worst, std::abs(tr.energy - drop) / drop);
      ++count;
    }
  }
  if (count == 0) {
    skip_check(rep, "energy_identity", "no descending trajectories");
  } else {
    std::ostringstream os;
    os << "max relative defect " << std::scientific << std::setprecision(2) << worst << " over " << count
       << " trajectories";
    add_check(rep, "energy_identity", worst < 1e-6, os.str());
  }
}

}  // namespace

RunReport run_pipeline(const PipelineConfig& config, Stage until, bool normalized) {
  config.validate();
  RunReport rep;
  rep.manifold = config.manifold;
  rep.manifold_params = config.manifold_params;
  rep.function_params = config.function_params;
  rep.last_stage = until;

  std::optional<MorseSystem> sys;
  std::vector<CriticalPoint> crit;
  std::optional<ModuliSolver> solver;
  std::optional<ModuliData> data;

  auto stage = [&](const char* name, const std::function<void()>& body) -> bool {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      body();
    } catch (const std::exception& e) {
      rep.errors.push_back(std::string(name) + ": " + e.what());
      rep.timings.emplace_back(name, seconds_since(t0));
      return false;
    }
    rep.timings.emplace_back(name, seconds_since(t0));
    return true;
  };

  bool ok = stage("critical_points", [&] {
    sys.emplace(make_builtin_system(config.manifold, config.manifold_params, config.function_params));
    crit = find_critical_points(*sys);
    if (!config.orientation_overrides.empty()) flip_orientation(crit, resolve_overrides(crit, config.orientation_overrides));
    for (const auto& c : crit) {
      CriticalEntry e;
      e.point = c;
      try {
        e.chart = morse_chart(*sys, c, config.chart_epsilon);
        if (!e.chart->locally_trivial()) {
          rep.warnings.push_back("metric not locally trivial at " + c.label + " (defect " +
                                 std::to_string(e.chart->defect()) + ")");
        }
      } catch (const Error& err) {
        e.chart_error = err.what();
      }
      rep.critical.push_back(std::move(e));
    }
    add_check(rep, "critical_points_found", !crit.empty(), std::to_string(crit.size()) + " critical points");
  });

  if (ok && until >= Stage::moduli) {
    ok = stage("moduli", [&] {
      ModuliOptions mopts = config.moduli;
      mopts.flow = config.flow;
      solver.emplace(*sys, crit, mopts);
      for (const auto& p : crit) {
        for (const auto& q : crit) {
          if (p.index - q.index != 1) continue;
          ModuliEntry e;
          e.p = p.id;
          e.q = q.id;
          e.classes = solver->connecting_orbits(p.id, q.id);
          e.signed_count = solver->signed_count(p.id, q.id);
          rep.moduli.push_back(std::move(e));
        }
      }
      bool identity = true, consistent = true, shadowing = true;
      int components = 0;
      for (const auto& p : crit) {
        for (const auto& q : crit) {
          if (p.index != 2 || q.index != 0) continue;
          const ModuliCurve& curve = solver->moduli_curve(p.id, q.id);
          for (const auto& comp : curve.components) {
            ++components;
            identity = identity && comp.weighted_sum() == 0;
            consistent = consistent && comp.boundary_orientation_consistent();
            for (const auto& ep : comp.endpoints) shadowing = shadowing && ep.shadowing_ok;
          }
          rep.curves.push_back({curve});
        }
      }
      if (components == 0) {
        skip_check(rep, "endpoint_identity", "no one-dimensional moduli spaces");
        skip_check(rep, "boundary_orientation", "no one-dimensional moduli spaces");
        skip_check(rep, "endpoint_shadowing", "no one-dimensional moduli spaces");
      } else {
        const std::string n = std::to_string(components) + " components";
        add_check(rep, "endpoint_identity", identity, n);
        add_check(rep, "boundary_orientation", consistent, n);
        add_check(rep, "endpoint_shadowing", shadowing, n);
      }
      energy_check(rep, *sys, *solver);
    });
  }

  if (ok && until >= Stage::strata) {
    ok = stage("strata", [&] {
      data = collect_moduli_data(*solver);
      const SuccessionPoset poset(*data);
      rep.poset = poset.relations();
      bool faces = true, disks = true, spheres = true;
      for (const auto& p : crit) {
        const StrataEntry d = summarize(stratification(SpaceTag::Dbar, poset, *data, p.id));
        if (d.complete) {
          faces = faces && d.faces_consistent;
          disks = disks && d.euler == 1;
          const long sphere = p.index == 0 ? 0 : 1 + ((p.index - 1) % 2 == 0 ? 1 : -1);
          spheres = spheres && d.boundary_euler == sphere;
        }
        rep.strata.push_back(d);
      }
      for (const auto& [p, q] : rep.poset) {
        for (SpaceTag tag : {SpaceTag::Mbar, SpaceTag::Wbar}) {
          const StrataEntry e = summarize(stratification(tag, poset, *data, p, q));
          if (e.complete) faces = faces && e.faces_consistent;
          rep.strata.push_back(e);
        }
      }
      add_check(rep, "faces_consistent", faces, "every corner lies in the closure of k faces");
      add_check(rep, "disk_euler", disks, "chi(Dbar(p)) = 1");
      add_check(rep, "sphere_boundary_euler", spheres, "chi of the boundary sphere of Dbar(p)");
    });
  }

  if (ok && until >= Stage::homology) {
    ok = stage("homology", [&] {
      SignedCounts counts;
      for (const auto& m : rep.moduli) counts[{m.p, m.q}] = m.signed_count;
      rep.complex = build_complex(crit, counts, config.level_cap);
      const DSquaredReport dsq = verify_d_squared(*rep.complex);
      std::string detail = "d^2 = 0";
      if (!dsq.pass) {
        const auto& v = dsq.violations.front();
        detail = "entry (" + std::to_string(v.q) + ", " + std::to_string(v.p) + ") = " + std::to_string(v.value);
      }
      add_check(rep, "d_squared", dsq.pass, detail);
      if (!dsq.pass) {
        skip_check(rep, "euler_characteristic", "homology needs d^2 = 0");
        return;
      }
      rep.homology = smith_homology(*rep.complex);
      add_check(rep, "euler_characteristic", rep.homology->euler_from_betti == rep.homology->euler_from_generators,
                "generators " + std::to_string(rep.homology->euler_from_generators) + ", Betti " +
                    std::to_string(rep.homology->euler_from_betti));
    });
  }

  if (!config.report_path.empty()) {
    std::ofstream out(config.report_path);
    if (!out) {
      rep.errors.push_back("output: cannot write " + config.report_path);
    } else {
      out << report_json(rep, normalized) << '\n';
    }
  }
  if (!config.csv_dir.empty()) {
    try {
      write_report_csv(rep, config.csv_dir);
    } catch (const std::exception& e) {
      rep.errors.push_back(std::string("output: ") + e.what());
    }
  }
  return rep;
}

}  // namespace morseflow
