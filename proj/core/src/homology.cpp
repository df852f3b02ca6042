#include "morseflow/homology.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>

#include "morseflow/moduli.hpp"

namespace morseflow {

namespace {

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t r = 0;
  if (__builtin_mul_overflow(a, b, &r)) throw std::overflow_error("integer overflow in chain complex arithmetic");
  return r;
}

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t r = 0;
  if (__builtin_add_overflow(a, b, &r)) throw std::overflow_error("integer overflow in chain complex arithmetic");
  return r;
}

IntMat checked_product(const IntMat& a, const IntMat& b) {
  IntMat out = IntMat::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      std::int64_t s = 0;
      for (Eigen::Index k = 0; k < a.cols(); ++k) s = checked_add(s, checked_mul(a(i, k), b(k, j)));
      out(i, j) = s;
    }
  }
  return out;
}

// row_i -= f * row_j
void row_axpy(IntMat& m, Eigen::Index i, Eigen::Index j, std::int64_t f) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) m(i, c) = checked_add(m(i, c), -checked_mul(f, m(j, c)));
}

void col_axpy(IntMat& m, Eigen::Index i, Eigen::Index j, std::int64_t f) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, i) = checked_add(m(r, i), -checked_mul(f, m(r, j)));
}

}  // namespace

int ChainComplex::rank(int k) const {
  if (k < 0 || k > top_degree()) return 0;
  return static_cast<int>(generators[k].size());
}

long ChainComplex::euler_characteristic() const {
  long chi = 0;
  for (int k = 0; k <= top_degree(); ++k) chi += (k % 2 == 0 ? 1 : -1) * rank(k);
  return chi;
}

IntMat ChainComplex::d(int k) const {
  if (k >= 1 && k <= top_degree()) return boundary[k];
  return IntMat::Zero(rank(k - 1), rank(k));
}

ChainComplex build_complex(const std::vector<CriticalPoint>& critical, const SignedCounts& counts,
                           std::optional<double> level_cap) {
  ChainComplex cx;
  int top = -1;
  for (const auto& c : critical) top = std::max(top, c.index);
  cx.level_cap = level_cap.value_or(std::numeric_limits<double>::infinity());
  cx.generators.assign(top + 1, {});
  for (const auto& c : critical) {
    if (!level_cap || c.value <= *level_cap) cx.generators[c.index].push_back(c.id);
  }
  for (auto& g : cx.generators) std::sort(g.begin(), g.end());
  // Drop empty top degrees so the complex ends at its last generator.
  while (!cx.generators.empty() && cx.generators.back().empty()) cx.generators.pop_back();

  cx.boundary.assign(cx.generators.size(), IntMat());
  for (int k = 1; k <= cx.top_degree(); ++k) {
    const auto& rows = cx.generators[k - 1];
    const auto& cols = cx.generators[k];
    IntMat m = IntMat::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        auto it = counts.find({cols[j], rows[i]});
        if (it == counts.end()) {
          throw IncompleteInputError("missing signed count #M(" + std::to_string(cols[j]) + ", " +
                                     std::to_string(rows[i]) + ")");
        }
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = it->second;
      }
    }
    cx.boundary[k] = std::move(m);
  }
  return cx;
}

SignedCounts compute_signed_counts(ModuliSolver& solver, std::optional<double> level_cap) {
  SignedCounts out;
  const auto& crit = solver.critical();
  for (const auto& p : crit) {
    if (level_cap && p.value > *level_cap) continue;
    for (const auto& q : crit) {
      if (q.index + 1 != p.index) continue;
      out[{p.id, q.id}] = solver.signed_count(p.id, q.id);
    }
  }
  return out;
}

DSquaredReport verify_d_squared(const ChainComplex& cx) {
  DSquaredReport rep;
  for (int k = 2; k <= cx.top_degree(); ++k) {
    const IntMat dd = checked_product(cx.d(k - 1), cx.d(k));
    for (Eigen::Index i = 0; i < dd.rows(); ++i) {
      for (Eigen::Index j = 0; j < dd.cols(); ++j) {
        if (dd(i, j) == 0) continue;
        DSquaredViolation v;
        v.degree = k;
        v.p = cx.generators[k][j];
        v.q = cx.generators[k - 2][i];
        v.value = dd(i, j);
        for (std::size_t r = 0; r < cx.generators[k - 1].size(); ++r) {
          const auto ri = static_cast<Eigen::Index>(r);
          const std::int64_t pr = cx.boundary[k](ri, j);
          const std::int64_t rq = cx.boundary[k - 1](i, ri);
          if (pr != 0 && rq != 0) v.terms.push_back({cx.generators[k - 1][r], pr, rq});
        }
        rep.violations.push_back(std::move(v));
        rep.pass = false;
      }
    }
  }
  return rep;
}

std::vector<std::int64_t> smith_invariants(IntMat m) {
  std::vector<std::int64_t> out;
  const Eigen::Index rows = m.rows(), cols = m.cols();
  for (Eigen::Index t = 0; t < std::min(rows, cols); ++t) {
    for (;;) {
      // Smallest nonzero magnitude in the trailing block becomes the pivot.
      Eigen::Index pi = -1, pj = -1;
      std::int64_t best = 0;
      for (Eigen::Index i = t; i < rows; ++i) {
        for (Eigen::Index j = t; j < cols; ++j) {
          const std::int64_t a = m(i, j) < 0 ? -m(i, j) : m(i, j);
          if (a != 0 && (best == 0 || a < best)) best = a, pi = i, pj = j;
        }
      }
      if (best == 0) return out;
      m.row(t).swap(m.row(pi));
      m.col(t).swap(m.col(pj));

      bool clean = true;
      for (Eigen::Index i = t + 1; i < rows; ++i) {
        if (m(i, t) == 0) continue;
        row_axpy(m, i, t, m(i, t) / m(t, t));
        if (m(i, t) != 0) clean = false;
      }
      for (Eigen::Index j = t + 1; j < cols; ++j) {
        if (m(t, j) == 0) continue;
        col_axpy(m, j, t, m(t, j) / m(t, t));
        if (m(t, j) != 0) clean = false;
      }
      if (!clean) continue;
      // The pivot must divide the whole trailing block; otherwise fold an offending row in.
      Eigen::Index bad = -1;
      for (Eigen::Index i = t + 1; i < rows && bad < 0; ++i) {
        for (Eigen::Index j = t + 1; j < cols; ++j) {
          if (m(i, j) % m(t, t) != 0) {
            bad = i;
            break;
          }
        }
      }
      if (bad < 0) break;
      row_axpy(m, t, bad, -1);
    }
    out.push_back(m(t, t) < 0 ? -m(t, t) : m(t, t));
  }
  return out;
}

HomologyResult smith_homology(const ChainComplex& cx) {
  const DSquaredReport dsq = verify_d_squared(cx);
  if (!dsq.pass) {
    const auto& v = dsq.violations.front();
    throw PreconditionError("d^2 != 0: entry (" + std::to_string(v.q) + ", " + std::to_string(v.p) +
                            ") = " + std::to_string(v.value));
  }
  const int top = cx.top_degree();
  HomologyResult res;
  res.betti.assign(std::max(top + 1, 0), 0);
  res.torsion.assign(std::max(top + 1, 0), {});
  // rank_d[k] = rank of d_k : C_k -> C_{k-1}
  std::vector<long> rank_d(top + 2, 0);
  for (int k = 1; k <= top; ++k) {
    const auto inv = smith_invariants(cx.d(k));
    rank_d[k] = static_cast<long>(inv.size());
    for (std::int64_t f : inv) {
      if (f > 1) res.torsion[k - 1].push_back(f);
    }
  }
  for (int k = 0; k <= top; ++k) {
    res.betti[k] = cx.rank(k) - rank_d[k] - rank_d[k + 1];
    res.euler_from_betti += (k % 2 == 0 ? 1 : -1) * res.betti[k];
  }
  res.euler_from_generators = cx.euler_characteristic();
  return res;
}

}  // namespace morseflow
