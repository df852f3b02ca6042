#include "morseflow/strata.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace morseflow {

const ModuliData::Point& ModuliData::point(int id) const {
  for (const Point& p : points) {
    if (p.id == id) return p;
  }
  throw DescriptorError("unknown critical point " + std::to_string(id));
}

std::optional<int> ModuliData::moduli_components(int a, int b) const {
  const int d = point(a).index - point(b).index;
  if (d <= 0) return 0;
  const auto& table = d == 1 ? class_count : component_count;
  if (d > 2) return std::nullopt;
  auto it = table.find({a, b});
  if (it == table.end()) return std::nullopt;
  return it->second;
}

ModuliData collect_moduli_data(ModuliSolver& solver) {
  ModuliData data;
  const auto& crit = solver.critical();
  for (const CriticalPoint& c : crit) data.points.push_back({c.id, c.label, c.index, c.value});
  for (const CriticalPoint& a : crit) {
    for (const CriticalPoint& b : crit) {
      if (a.index - b.index == 1) {
        try {
          data.class_count[{a.id, b.id}] = static_cast<int>(solver.connecting_orbits(a.id, b.id).size());
        } catch (const UnsupportedError&) {
          // Unknown count; strata depending on it report components = -1.
        }
      }
    }
  }
  for (const CriticalPoint& a : crit) {
    for (const CriticalPoint& b : crit) {
      if (a.index - b.index != 2) continue;
      if (a.index != 2) continue;
      const ModuliCurve& curve = solver.moduli_curve(a.id, b.id);
      data.component_count[{a.id, b.id}] = static_cast<int>(curve.components.size());
      for (std::size_t ci = 0; ci < curve.components.size(); ++ci) {
        for (const EndpointRecord& e : curve.components[ci].endpoints) {
          if (e.intermediate < 0 || e.class_pr < 0 || e.class_rq < 0) continue;
          data.merges.push_back({a.id, e.intermediate, b.id, e.class_pr, e.class_rq, static_cast<int>(ci)});
        }
      }
    }
  }
  return data;
}

SuccessionPoset::SuccessionPoset(const ModuliData& data) {
  const std::size_t n = data.points.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (data.points[i].id != static_cast<int>(i)) throw ConsistencyError("critical point ids must equal positions");
  }
  order_.assign(n, std::vector<bool>(n, false));
  auto mark = [&](const std::map<std::pair<int, int>, int>& table) {
    for (const auto& [pair, count] : table) {
      if (count > 0) order_[static_cast<std::size_t>(pair.first)][static_cast<std::size_t>(pair.second)] = true;
    }
  };
  mark(data.class_count);
  mark(data.component_count);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!order_[i][k]) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (order_[k][j]) order_[i][j] = true;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (order_[i][i]) throw ConsistencyError("succession relation has a cycle through " + data.points[i].label);
    for (std::size_t j = 0; j < n; ++j) {
      if (order_[i][j] && !(data.points[i].value > data.points[j].value)) {
        throw ConsistencyError("f does not decrease from " + data.points[i].label + " to " + data.points[j].label);
      }
    }
  }
}

bool SuccessionPoset::succeeds(int p, int q) const {
  if (p < 0 || q < 0 || p >= size() || q >= size()) throw DescriptorError("critical point out of range");
  return order_[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)];
}

std::vector<std::pair<int, int>> SuccessionPoset::relations() const {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < size(); ++i) {
    for (int j = 0; j < size(); ++j) {
      if (succeeds(i, j)) out.emplace_back(i, j);
    }
  }
  return out;
}

std::vector<CriticalSequence> critical_sequences(const SuccessionPoset& poset, int head, std::optional<int> tail) {
  std::vector<CriticalSequence> out;
  CriticalSequence cur{head};
  std::function<void()> extend = [&]() {
    const int last = cur.back();
    if (cur.size() == 1 ? !tail.has_value() : (!tail || last == *tail)) out.push_back(cur);
    if (tail && last == *tail) return;
    for (int next = 0; next < poset.size(); ++next) {
      if (!poset.succeeds(last, next)) continue;
      if (tail && next != *tail && !poset.succeeds(next, *tail)) continue;
      cur.push_back(next);
      extend();
      cur.pop_back();
    }
  };
  if (head < 0 || head >= poset.size()) throw DescriptorError("critical point out of range");
  extend();
  std::sort(out.begin(), out.end());
  return out;
}

std::string_view to_string(SpaceTag tag) {
  switch (tag) {
    case SpaceTag::Mbar: return "Mbar";
    case SpaceTag::Dbar: return "Dbar";
    case SpaceTag::Wbar: return "Wbar";
  }
  return "unknown";
}

long Stratification::components_at(int k) const {
  long total = 0;
  for (const StratumRecord& s : strata) {
    if (s.k != k) continue;
    if (s.components < 0) return -1;
    total += s.components;
  }
  return total;
}

int Stratification::max_k() const {
  int m = 0;
  for (const StratumRecord& s : strata) m = std::max(m, s.k);
  return m;
}

long Stratification::euler_characteristic() const {
  long chi = 0;
  for (const Cell& c : cells) chi += (c.dim % 2 == 0) ? 1 : -1;
  return chi;
}

long Stratification::boundary_euler_characteristic() const {
  long chi = 0;
  for (const Cell& c : cells) {
    if (c.k >= 1) chi += (c.dim % 2 == 0) ? 1 : -1;
  }
  return chi;
}

bool Stratification::faces_consistent() const {
  if (!cells_complete) return false;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (static_cast<int>(faces[i].size()) != cells[i].k) return false;
  }
  return true;
}

namespace {

struct Factor {
  int a = 0, b = 0;
  bool w = false;
};

std::vector<Factor> factors_of(const StratumRecord& s) {
  std::vector<Factor> f;
  for (std::size_t i = 0; i + 1 < s.sequence.size(); ++i) {
    f.push_back({s.sequence[i], s.sequence[i + 1], static_cast<int>(i) == s.s});
  }
  return f;
}

// Component of the factor obtained by gluing a run of consecutive factors.
// Returns -1 when the data does not contain the glued endpoint.
int merged_component(const ModuliData& data, const std::vector<Factor>& fs, const std::vector<int>& comps,
                     std::size_t from, std::size_t to) {
  std::vector<std::pair<Factor, int>> run;
  for (std::size_t i = from; i < to; ++i) {
    if (fs[i].a == fs[i].b) continue;  // W(c, c) is a point
    run.emplace_back(fs[i], comps[i]);
  }
  if (run.empty()) return 0;
  if (run.size() == 1) return run[0].second;
  if (run.size() == 2) {
    for (const ModuliData::Merge& m : data.merges) {
      if (m.a == run[0].first.a && m.r == run[0].first.b && m.b == run[1].first.b && m.class_ar == run[0].second &&
          m.class_rb == run[1].second) {
        return m.component_ab;
      }
    }
    return -1;
  }
  throw UnsupportedError("face closure across more than one intermediate critical point");
}

}  // namespace

Stratification stratification(SpaceTag tag, const SuccessionPoset& poset, const ModuliData& data, int head,
                              std::optional<int> tail) {
  Stratification st;
  st.tag = tag;
  st.head = head;
  const int ind_p = data.point(head).index;
  if (tag == SpaceTag::Dbar) {
    if (tail) throw PreconditionError("Dbar takes no tail");
    st.total_dim = ind_p;
  } else {
    if (!tail) throw PreconditionError("Mbar and Wbar need a tail");
    st.tail = *tail;
    const int ind_q = data.point(*tail).index;
    st.total_dim = tag == SpaceTag::Mbar ? ind_p - ind_q - 1 : ind_p - ind_q;
  }

  // Stratum index data.
  std::vector<StratumRecord> recs;
  if (tag == SpaceTag::Mbar) {
    if (poset.succeeds(head, *tail)) {
      for (const auto& seq : critical_sequences(poset, head, tail)) recs.push_back({seq, -1, sequence_length(seq), 0, 0});
    }
  } else if (tag == SpaceTag::Dbar) {
    for (const auto& seq : critical_sequences(poset, head)) recs.push_back({seq, -1, sequence_length(seq) + 1, 0, 0});
  } else if (head == *tail || poset.succeeds(head, *tail)) {
    const int q = *tail;
    std::vector<CriticalSequence> heads = critical_sequences(poset, head);
    std::vector<CriticalSequence> tails;
    for (int h = 0; h < poset.size(); ++h) {
      if (h == q) {
        tails.push_back({q});
      } else if (poset.succeeds(h, q)) {
        for (const auto& seq : critical_sequences(poset, h, q)) tails.push_back(seq);
      }
    }
    for (const auto& i1 : heads) {
      for (const auto& i2 : tails) {
        const int t1 = i1.back(), t2 = i2.front();
        if (t1 != t2 && !poset.succeeds(t1, t2)) continue;
        StratumRecord r;
        r.sequence = i1;
        r.sequence.insert(r.sequence.end(), i2.begin(), i2.end());
        r.s = static_cast<int>(i1.size()) - 1;
        r.k = static_cast<int>(r.sequence.size()) - 2;
        recs.push_back(std::move(r));
      }
    }
  }

  for (StratumRecord& r : recs) {
    int dim = 0;
    long comps = 1;
    for (const Factor& f : factors_of(r)) {
      const int d = data.point(f.a).index - data.point(f.b).index - (f.w ? 0 : 1);
      if (d < 0) throw ConsistencyError("negative stratum dimension");
      dim += d;
      if (f.w && f.a == f.b) continue;
      const auto c = data.moduli_components(f.a, f.b);
      if (!c) {
        comps = -1;
      } else if (comps >= 0) {
        comps *= *c;
      }
    }
    if (tag == SpaceTag::Dbar) dim += data.point(r.sequence.back()).index;
    r.dim = dim;
    r.components = comps;
    if (r.dim != st.total_dim - r.k) {
      throw ConsistencyError("stratum dimension " + std::to_string(r.dim) + " disagrees with codimension " +
                             std::to_string(r.k));
    }
  }
  std::stable_sort(recs.begin(), recs.end(), [](const StratumRecord& a, const StratumRecord& b) {
    if (a.k != b.k) return a.k < b.k;
    if (a.sequence != b.sequence) return a.sequence < b.sequence;
    return a.s < b.s;
  });
  st.strata = std::move(recs);

  // Cells: cartesian product of factor components.
  for (std::size_t si = 0; si < st.strata.size(); ++si) {
    const StratumRecord& r = st.strata[si];
    if (r.components < 0) {
      st.cells_complete = false;
      continue;
    }
    const std::vector<Factor> fs = factors_of(r);
    std::vector<int> counts;
    for (const Factor& f : fs) {
      counts.push_back(f.w && f.a == f.b ? 1 : *data.moduli_components(f.a, f.b));
    }
    if (r.components == 0) continue;
    std::vector<int> pick(fs.size(), 0);
    while (true) {
      st.cells.push_back({static_cast<int>(si), pick, r.k, r.dim});
      std::size_t i = 0;
      while (i < pick.size() && ++pick[i] == counts[i]) pick[i++] = 0;
      if (i == pick.size()) break;
    }
  }

  // Face closure: does codimension-1 cell F contain cell X in its closure?
  auto contains = [&](const Cell& face, const Cell& x) -> bool {
    const StratumRecord& fr = st.strata[static_cast<std::size_t>(face.stratum)];
    const StratumRecord& xr = st.strata[static_cast<std::size_t>(x.stratum)];
    const auto ff = factors_of(fr);
    const auto xf = factors_of(xr);
    const auto& fe = fr.sequence;
    const auto& xe = xr.sequence;
    std::vector<std::size_t> pos(fe.size());
    std::function<bool(std::size_t, std::size_t)> embed = [&](std::size_t j, std::size_t start) -> bool {
      if (j == fe.size()) {
        if (tag != SpaceTag::Dbar && pos.back() != xe.size() - 1) return false;
        for (std::size_t t = 0; t + 1 < fe.size(); ++t) {
          const std::size_t lo = pos[t], hi = pos[t + 1];
          const bool spans_w = xr.s >= 0 && static_cast<std::size_t>(xr.s) >= lo && static_cast<std::size_t>(xr.s) < hi;
          if (ff[t].w != spans_w) return false;
          if (merged_component(data, xf, x.factor_components, lo, hi) != face.factor_components[t]) return false;
        }
        return true;
      }
      for (std::size_t i = start; i < xe.size(); ++i) {
        if (xe[i] != fe[j]) continue;
        if (j == 0 && i != 0) break;
        pos[j] = i;
        if (embed(j + 1, i + 1)) return true;
      }
      return false;
    };
    return embed(0, 0);
  };

  st.faces.assign(st.cells.size(), {});
  for (std::size_t xi = 0; xi < st.cells.size(); ++xi) {
    if (st.cells[xi].k < 1) continue;
    for (std::size_t fi = 0; fi < st.cells.size(); ++fi) {
      if (st.cells[fi].k != 1) continue;
      if (contains(st.cells[fi], st.cells[xi])) st.faces[xi].push_back(static_cast<int>(fi));
    }
  }
  return st;
}

std::vector<ManifoldPoint> evaluate_on_levels(const MorseSystem& sys, const std::vector<CriticalPoint>& critical,
                                              const std::vector<FlowLinePiece>& line,
                                              const std::vector<double>& levels, const IntegratorOptions& opts) {
  auto crit_value = [&](int id) {
    for (const CriticalPoint& c : critical) {
      if (c.id == id) return c.value;
    }
    throw DescriptorError("unknown critical point " + std::to_string(id));
  };
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    if (line[i].to != line[i + 1].from) throw PreconditionError("flow line pieces do not chain");
  }
  std::vector<ManifoldPoint> out;
  for (double a : levels) {
    for (const CriticalPoint& c : critical) {
      if (std::abs(a - c.value) < 1e-9) throw LevelError("level " + std::to_string(a) + " equals a critical value");
    }
    const FlowLinePiece* piece = nullptr;
    for (const FlowLinePiece& pc : line) {
      if (crit_value(pc.from) > a && a > crit_value(pc.to)) piece = &pc;
    }
    if (piece == nullptr) throw LevelError("level " + std::to_string(a) + " is outside the range of the flow line");
    const double fx = sys.value(piece->point);
    if (std::abs(fx - a) < 1e-12) {
      out.push_back(sys.atlas().canonical(piece->point));
      continue;
    }
    const int dir = fx > a ? 1 : -1;
    const Trajectory tr = integrate(sys, piece->point, StopCondition::at_level(a), opts, &critical, dir);
    if (tr.status != StopReason::reached_level) {
      throw UndefinedFlowMapError("flow line piece does not reach level " + std::to_string(a), tr.critical.value_or(-1));
    }
    out.push_back(sys.atlas().canonical(tr.end()));
  }
  return out;
}

double min_tuple_separation(const Atlas& atlas, const std::vector<std::vector<ManifoldPoint>>& tuples) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tuples.size(); ++i) {
    for (std::size_t j = i + 1; j < tuples.size(); ++j) {
      double d = 0.0;
      for (std::size_t e = 0; e < tuples[i].size() && e < tuples[j].size(); ++e) {
        d = std::max(d, std::min(atlas.distance(tuples[i][e], tuples[j][e]), atlas.distance(tuples[j][e], tuples[i][e])));
      }
      best = std::min(best, d);
    }
  }
  return best;
}

}  // namespace morseflow
