#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "morseflow/homology.hpp"
#include "morseflow/moduli.hpp"
#include "morseflow/strata.hpp"

namespace morseflow {

struct PipelineConfig {
  std::string manifold = "flat-torus";
  ParamTable manifold_params;
  ParamTable function_params;
  IntegratorOptions flow;
  ModuliOptions moduli;
  /// "auto": sphere levels at midpoints between critical values, sign level at
  /// the default fraction. "fraction": sign level at levels.sign_fraction.
  std::string levels_mode = "auto";
  /// Homology is restricted to critical values <= cap when set.
  std::optional<double> level_cap;
  /// Labels (or decimal ids) of critical points whose V- frame is reversed.
  std::vector<std::string> orientation_overrides;
  std::string report_path;
  std::string csv_dir;
  /// Radius of the sampled Morse chart used for the local-triviality defect.
  double chart_epsilon = 0.1;

  /// Throws ConfigurationError on non-positive tolerances or unknown modes.
  void validate() const;
};

/// Parse TOML text; unknown keys and wrong types raise ConfigurationError.
PipelineConfig parse_config(const std::string& toml_text);
PipelineConfig load_config(const std::string& path);

enum class Stage { critical_points, moduli, strata, homology };

enum class CheckStatus { pass, fail, skipped };
std::string_view to_string(CheckStatus s);

struct CheckVerdict {
  std::string name;
  CheckStatus status = CheckStatus::skipped;
  std::string detail;
};

struct CriticalEntry {
  CriticalPoint point;
  std::optional<MorseChartReport> chart;
  std::string chart_error;
};

struct ModuliEntry {
  int p = 0, q = 0;
  std::vector<FlowLineClass> classes;
  int signed_count = 0;
};

struct CurveEntry {
  ModuliCurve curve;
};

struct StrataEntry {
  SpaceTag tag = SpaceTag::Dbar;
  int head = 0;
  int tail = -1;
  int total_dim = 0;
  std::vector<long> components_by_k;
  long euler = 0;
  long boundary_euler = 0;
  bool faces_consistent = true;
  bool complete = true;
};

struct RunReport {
  static constexpr const char* kSchema = "morseflow.report/1";
  std::string manifold;
  ParamTable manifold_params;
  ParamTable function_params;
  Stage last_stage = Stage::homology;
  std::vector<CriticalEntry> critical;
  std::vector<ModuliEntry> moduli;
  std::vector<CurveEntry> curves;
  std::vector<std::pair<int, int>> poset;
  std::vector<StrataEntry> strata;
  std::optional<ChainComplex> complex;
  std::optional<HomologyResult> homology;
  std::vector<CheckVerdict> checks;
  std::vector<std::string> warnings;
  std::vector<std::string> errors;
  /// Stage name -> wall seconds.
  std::vector<std::pair<std::string, double>> timings;

  /// No errors and no failed check.
  bool ok() const;
};

/// Run the stages up to and including `until`; module errors are recorded
/// in the report rather than thrown. Writes the report / CSV files when the
/// config names them.
RunReport run_pipeline(const PipelineConfig& config, Stage until = Stage::homology, bool normalized = false);

/// JSON rendering; `normalized` drops timings so identical runs compare equal.
std::string report_json(const RunReport& report, bool normalized = false);

/// CSV dumps (critical points, classes, curve polylines) into dir.
void write_report_csv(const RunReport& report, const std::string& dir);

}  // namespace morseflow
