#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "morseflow/moduli.hpp"

namespace morseflow {

/// Combinatorial summary of the computed moduli spaces; everything the strata
/// layer needs and nothing numerical.
struct ModuliData {
  struct Point {
    int id = 0;
    std::string label;
    int index = 0;
    double value = 0.0;
  };
  /// The broken pair (a -> r class_ar, r -> b class_rb) is an endpoint of
  /// component `component_ab` of the one-dimensional M(a, b).
  struct Merge {
    int a = 0, r = 0, b = 0;
    int class_ar = 0, class_rb = 0;
    int component_ab = 0;
  };
  std::vector<Point> points;
  /// |M(a, b)| for index difference 1.
  std::map<std::pair<int, int>, int> class_count;
  /// Number of components of M(a, b) for index difference 2.
  std::map<std::pair<int, int>, int> component_count;
  std::vector<Merge> merges;

  const Point& point(int id) const;
  /// Components of M(a, b): classes, curve components, or nullopt when unknown.
  std::optional<int> moduli_components(int a, int b) const;
};

/// Run the moduli computations for every pair with index difference 1 or 2
/// (where supported) and collect the counts.
ModuliData collect_moduli_data(ModuliSolver& solver);

class SuccessionPoset {
 public:
  /// Direct relations from nonempty moduli, then transitive closure.
  /// Throws ConsistencyError on a cycle or when f fails to decrease.
  explicit SuccessionPoset(const ModuliData& data);

  bool succeeds(int p, int q) const;
  /// All (p, q) with p > q, lexicographic.
  std::vector<std::pair<int, int>> relations() const;
  int size() const { return static_cast<int>(order_.size()); }

 private:
  std::vector<std::vector<bool>> order_;
};

using CriticalSequence = std::vector<int>;

/// |I| = number of entries - 2; the singleton (p) has |I| = -1.
inline int sequence_length(const CriticalSequence& s) { return static_cast<int>(s.size()) - 2; }

/// Strictly descending chains starting at head (and ending at tail when given),
/// including the singleton when no tail is given. Lexicographic by id.
std::vector<CriticalSequence> critical_sequences(const SuccessionPoset& poset, int head,
                                                 std::optional<int> tail = std::nullopt);

enum class SpaceTag { Mbar, Dbar, Wbar };

std::string_view to_string(SpaceTag tag);

struct StratumRecord {
  CriticalSequence sequence;
  /// Position of the W(r_s, r_{s+1}) factor (Wbar only), else -1.
  int s = -1;
  int k = 0;
  int dim = 0;
  /// Product of factor component counts; -1 when a factor count is unknown.
  long components = 0;
};

/// One connected piece of a stratum: a choice of component per factor.
struct Cell {
  int stratum = 0;
  std::vector<int> factor_components;
  int k = 0;
  int dim = 0;
};

struct Stratification {
  SpaceTag tag = SpaceTag::Mbar;
  int head = 0;
  int tail = -1;
  int total_dim = 0;
  std::vector<StratumRecord> strata;
  std::vector<Cell> cells;
  /// faces[c]: indices of codimension-1 cells whose closure contains cell c.
  std::vector<std::vector<int>> faces;
  /// False when some factor count is unknown, so cells were not enumerated.
  bool cells_complete = true;

  long components_at(int k) const;
  int max_k() const;
  /// Sum of (-1)^dim over cells (cells are open balls on the built-ins).
  long euler_characteristic() const;
  /// Same, restricted to cells with k >= 1.
  long boundary_euler_characteristic() const;
  /// Every codimension-k cell lies in the closure of exactly k codimension-1 cells.
  bool faces_consistent() const;
};

Stratification stratification(SpaceTag tag, const SuccessionPoset& poset, const ModuliData& data, int head,
                              std::optional<int> tail = std::nullopt);

/// One link of a (possibly broken) flow line: from -> to, with any point on it.
struct FlowLinePiece {
  int from = 0;
  int to = 0;
  ManifoldPoint point;
};

/// Intersections of a generalized flow line with the levels a_0 > a_1 > ...
/// Throws LevelError for a level within 1e-9 of a critical value or outside
/// the value range of the line.
std::vector<ManifoldPoint> evaluate_on_levels(const MorseSystem& sys, const std::vector<CriticalPoint>& critical,
                                              const std::vector<FlowLinePiece>& line,
                                              const std::vector<double>& levels,
                                              const IntegratorOptions& opts = {});

/// Smallest distance between two distinct tuples (max over the tuple entries),
/// i.e. > 0 iff the evaluation map is injective on the given lines.
double min_tuple_separation(const Atlas& atlas, const std::vector<std::vector<ManifoldPoint>>& tuples);

}  // namespace morseflow
