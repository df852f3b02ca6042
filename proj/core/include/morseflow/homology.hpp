#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "morseflow/morse.hpp"

namespace morseflow {

class ModuliSolver;

using IntMat = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;
/// Signed counts #M(p, q) keyed by (p, q).
using SignedCounts = std::map<std::pair<int, int>, int>;

/// Cellular complex of the closed descending disks below a level cap.
struct ChainComplex {
  /// generators[k]: ids of the index-k critical points with f <= cap, by id.
  std::vector<std::vector<int>> generators;
  /// boundary[k] (k >= 1): rows generators[k-1], columns generators[k];
  /// entry (q, p) = #M(p, q). boundary[0] is unused and empty.
  std::vector<IntMat> boundary;
  double level_cap = 0.0;

  int top_degree() const { return static_cast<int>(generators.size()) - 1; }
  int rank(int k) const;
  long euler_characteristic() const;
  /// The matrix of d_k (an empty matrix of the right shape outside 1..top).
  IntMat d(int k) const;
};

/// Restrict to f <= level_cap (everything when nullopt) and fill the matrices.
/// Throws IncompleteInputError naming the first missing pair.
ChainComplex build_complex(const std::vector<CriticalPoint>& critical, const SignedCounts& counts,
                           std::optional<double> level_cap = std::nullopt);

/// Signed counts of every index-difference-1 pair below the cap.
SignedCounts compute_signed_counts(ModuliSolver& solver, std::optional<double> level_cap = std::nullopt);

struct DSquaredViolation {
  int degree = 0;  // of the source p
  int p = 0;
  int q = 0;
  std::int64_t value = 0;
  /// Broken pairs p -> r -> q contributing to the entry: (r, #M(p,r), #M(r,q)).
  struct Term {
    int r = 0;
    std::int64_t pr = 0, rq = 0;
  };
  std::vector<Term> terms;
};

struct DSquaredReport {
  bool pass = true;
  std::vector<DSquaredViolation> violations;
};

DSquaredReport verify_d_squared(const ChainComplex& complex);

struct HomologyResult {
  std::vector<long> betti;
  /// Invariant factors > 1 per degree.
  std::vector<std::vector<std::int64_t>> torsion;
  long euler_from_generators = 0;
  long euler_from_betti = 0;
};

/// Invariant factors (positive, each dividing the next) of an integer matrix.
/// Throws std::overflow_error if an intermediate entry exceeds int64.
std::vector<std::int64_t> smith_invariants(IntMat m);

/// Integer homology. Throws PreconditionError when d^2 != 0.
HomologyResult smith_homology(const ChainComplex& complex);

}  // namespace morseflow
