#include <filesystem>
#include <fstream>
#include <iomanip>

#include <nlohmann/json.hpp>

#include "morseflow/pipeline.hpp"

namespace morseflow {

namespace {

using nlohmann::json;

json vec(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json point(const ManifoldPoint& x) { return {{"chart", x.chart}, {"coords", vec(x.coords)}}; }

json params(const ParamTable& t) {
  json o = json::object();
  for (const auto& [k, v] : t) o[k] = v;
  return o;
}

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::critical_points: return "critical_points";
    case Stage::moduli: return "moduli";
    case Stage::strata: return "strata";
    case Stage::homology: return "homology";
  }
  return "?";
}

json matrix(const IntMat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

json critical_json(const CriticalEntry& e) {
  const CriticalPoint& c = e.point;
  json o = {{"id", c.id},         {"label", c.label},
            {"index", c.index},   {"value", c.value},
            {"position", point(c.position)}, {"eigenvalues", vec(c.eigenvalues)}};
  if (e.chart) {
    o["chart"] = {{"epsilon", e.chart->epsilon},
                  {"function_defect", e.chart->function_defect},
                  {"metric_defect", e.chart->metric_defect},
                  {"locally_trivial", e.chart->locally_trivial()}};
  } else {
    o["chart"] = {{"error", e.chart_error}};
  }
  return o;
}

json moduli_json(const ModuliEntry& m) {
  json classes = json::array();
  for (const auto& c : m.classes) {
    classes.push_back({{"parameter", c.parameter},
                       {"level", c.level},
                       {"representative", point(c.representative)},
                       {"winding", c.winding},
                       {"sign", c.sign}});
  }
  return {{"p", m.p}, {"q", m.q}, {"signed_count", m.signed_count}, {"classes", std::move(classes)}};
}

json curve_json(const ModuliCurve& c) {
  json comps = json::array();
  for (const auto& comp : c.components) {
    json ends = json::array();
    for (const auto& e : comp.endpoints) {
      ends.push_back({{"parameter", e.parameter},
                      {"intermediate", e.intermediate},
                      {"class_pr", e.class_pr},
                      {"class_rq", e.class_rq},
                      {"boundary_sign", e.boundary_sign},
                      {"product_sign", e.product_sign},
                      {"weighted", e.weighted},
                      {"shadowing_ok", e.shadowing_ok},
                      {"offset_used", e.offset_used}});
    }
    comps.push_back({{"parameter_begin", comp.parameter_begin},
                     {"parameter_end", comp.parameter_end},
                     {"winding", comp.winding},
                     {"weighted_sum", comp.weighted_sum()},
                     {"boundary_orientation_consistent", comp.boundary_orientation_consistent()},
                     {"endpoints", std::move(ends)}});
  }
  return {{"p", c.source},
          {"q", c.target},
          {"level", c.level},
          {"weighted_endpoint_sum", c.weighted_endpoint_sum()},
          {"components", std::move(comps)}};
}

json strata_json(const StrataEntry& s) {
  json o = {{"space", std::string(to_string(s.tag))},
            {"head", s.head},
            {"dimension", s.total_dim},
            {"components_by_k", s.components_by_k},
            {"complete", s.complete}};
  if (s.tail >= 0) o["tail"] = s.tail;
  if (s.complete) {
    o["euler"] = s.euler;
    o["boundary_euler"] = s.boundary_euler;
    o["faces_consistent"] = s.faces_consistent;
  }
  return o;
}

}  // namespace

std::string report_json(const RunReport& r, bool normalized) {
  json o;
  o["schema"] = RunReport::kSchema;
  o["manifold"] = {{"name", r.manifold}, {"params", params(r.manifold_params)}};
  o["function"] = {{"params", params(r.function_params)}};
  o["stage"] = std::string(stage_name(r.last_stage));

  json crit = json::array();
  for (const auto& c : r.critical) crit.push_back(critical_json(c));
  o["critical_points"] = std::move(crit);

  json moduli = json::array();
  for (const auto& m : r.moduli) moduli.push_back(moduli_json(m));
  o["moduli"] = std::move(moduli);

  json curves = json::array();
  for (const auto& c : r.curves) curves.push_back(curve_json(c.curve));
  o["curves"] = std::move(curves);

  json poset = json::array();
  for (const auto& [p, q] : r.poset) poset.push_back({p, q});
  o["poset"] = std::move(poset);

  json strata = json::array();
  for (const auto& s : r.strata) strata.push_back(strata_json(s));
  o["strata"] = std::move(strata);

  if (r.complex) {
    json d = json::object();
    for (int k = 1; k <= r.complex->top_degree(); ++k) d[std::to_string(k)] = matrix(r.complex->boundary[k]);
    o["complex"] = {{"generators", r.complex->generators}, {"boundary", std::move(d)}};
    if (std::isfinite(r.complex->level_cap)) o["complex"]["level_cap"] = r.complex->level_cap;
  } else {
    o["complex"] = nullptr;
  }
  if (r.homology) {
    o["homology"] = {{"betti", r.homology->betti}, {"torsion", r.homology->torsion}};
  } else {
    o["homology"] = nullptr;
  }

  json checks = json::array();
  for (const auto& c : r.checks) {
    checks.push_back({{"name", c.name}, {"status", std::string(to_string(c.status))}, {"detail", c.detail}});
  }
  o["checks"] = std::move(checks);
  o["warnings"] = r.warnings;
  o["errors"] = r.errors;
  o["ok"] = r.ok();
  if (!normalized) {
    json t = json::object();
    for (const auto& [name, sec] : r.timings) t[name] = sec;
    o["timings"] = std::move(t);
  }
  return o.dump(2);
}

void write_report_csv(const RunReport& r, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(fs::path(dir) / name);
    if (!out) throw Error("cannot write " + (fs::path(dir) / name).string());
    out << std::setprecision(17);
    return out;
  };
  {
    std::ofstream out = open("critical_points.csv");
    out << "id,label,index,value,chart,coords\n";
    for (const auto& e : r.critical) {
      const auto& c = e.point;
      out << c.id << ',' << c.label << ',' << c.index << ',' << c.value << ',' << c.position.chart << ',';
      for (Eigen::Index i = 0; i < c.position.coords.size(); ++i) out << (i ? " " : "") << c.position.coords[i];
      out << '\n';
    }
  }
  {
    std::ofstream out = open("classes.csv");
    out << "p,q,class,parameter,sign,chart,coords\n";
    for (const auto& m : r.moduli) {
      for (std::size_t k = 0; k < m.classes.size(); ++k) {
        const auto& c = m.classes[k];
        out << m.p << ',' << m.q << ',' << k << ',' << c.parameter << ',' << c.sign << ',' << c.representative.chart
            << ',';
        for (Eigen::Index i = 0; i < c.representative.coords.size(); ++i) {
          out << (i ? " " : "") << c.representative.coords[i];
        }
        out << '\n';
      }
    }
  }
  for (const auto& ce : r.curves) {
    const ModuliCurve& c = ce.curve;
    std::ofstream out = open("curve_" + std::to_string(c.source) + "_" + std::to_string(c.target) + ".csv");
    out << "component,chart,coords\n";
    for (std::size_t k = 0; k < c.components.size(); ++k) {
      for (const auto& x : c.components[k].polyline) {
        out << k << ',' << x.chart << ',';
        for (Eigen::Index i = 0; i < x.coords.size(); ++i) out << (i ? " " : "") << x.coords[i];
        out << '\n';
      }
    }
  }
}

}  // namespace morseflow
