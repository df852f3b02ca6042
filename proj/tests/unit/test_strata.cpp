#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "morseflow/strata.hpp"

namespace {

using namespace morseflow;
using namespace mftest;

const ModuliData& torus_data() {
  static const ModuliData d = collect_moduli_data(torus_solver());
  return d;
}
const ModuliData& ellipsoid_data() {
  static const ModuliData d = collect_moduli_data(ellipsoid_solver());
  return d;
}
const SuccessionPoset& torus_poset() {
  static const SuccessionPoset p(torus_data());
  return p;
}
const SuccessionPoset& ellipsoid_poset() {
  static const SuccessionPoset p(ellipsoid_data());
  return p;
}

TEST(ModuliDataTest, TorusCounts) {
  const auto& d = torus_data();
  EXPECT_EQ(d.points.size(), 4u);
  EXPECT_EQ(d.moduli_components(kP, kR), 2);
  EXPECT_EQ(d.moduli_components(kS, kQ), 2);
  EXPECT_EQ(d.moduli_components(kP, kQ), 4);
  EXPECT_EQ(d.merges.size(), 8u);
  // Equal index means an empty moduli space.
  EXPECT_EQ(d.moduli_components(kR, kS), 0);
}

TEST(Poset, TorusHasFiveRelations) {
  const std::vector<std::pair<int, int>> expect = {{kP, kS}, {kP, kR}, {kP, kQ}, {kS, kQ}, {kR, kQ}};
  auto got = torus_poset().relations();
  EXPECT_EQ(std::set(got.begin(), got.end()), std::set(expect.begin(), expect.end()));
  EXPECT_EQ(got.size(), 5u);
  EXPECT_FALSE(torus_poset().succeeds(kR, kS));
  EXPECT_FALSE(torus_poset().succeeds(kQ, kP));
}

TEST(Poset, EllipsoidOrdersByIndex) {
  const auto& cs = ellipsoid_crit();
  std::set<std::pair<int, int>> expect;
  for (const auto& a : cs) {
    for (const auto& b : cs) {
      if (a.index > b.index) expect.insert({a.id, b.id});
    }
  }
  const auto got = ellipsoid_poset().relations();
  EXPECT_EQ(std::set(got.begin(), got.end()), expect);
  // Two maxima, two saddles, two minima: 4 + 4 + 4 relations.
  EXPECT_EQ(got.size(), 12u);
}

TEST(Poset, SinglePointIsEmpty) {
  const auto sys = make_builtin_system("morse-local-model");
  ModuliSolver solver(sys, find_critical_points(sys));
  const SuccessionPoset poset(collect_moduli_data(solver));
  EXPECT_TRUE(poset.relations().empty());
  EXPECT_EQ(critical_sequences(poset, 0), (std::vector<CriticalSequence>{{0}}));
}

TEST(Poset, CyclesAreConsistencyErrors) {
  ModuliData d;
  d.points = {{0, "a", 1, 1.0}, {1, "b", 0, 0.0}};
  d.class_count = {{{0, 1}, 1}, {{1, 0}, 1}};
  EXPECT_THROW(SuccessionPoset{d}, ConsistencyError);
  ModuliData up;
  up.points = {{0, "a", 1, 0.0}, {1, "b", 0, 1.0}};
  up.class_count = {{{0, 1}, 1}};
  EXPECT_THROW(SuccessionPoset{up}, ConsistencyError);
}

TEST(Sequences, TorusFromTheMaximum) {
  const std::vector<CriticalSequence> all = critical_sequences(torus_poset(), kP);
  const std::set<CriticalSequence> expect = {{kP}, {kP, kR}, {kP, kS}, {kP, kQ}, {kP, kR, kQ}, {kP, kS, kQ}};
  EXPECT_EQ(all.size(), 6u);
  EXPECT_EQ(std::set(all.begin(), all.end()), expect);
  EXPECT_EQ(sequence_length({kP}), -1);
  EXPECT_EQ(sequence_length({kP, kR, kQ}), 1);
}

TEST(Sequences, TorusFromMaximumToMinimum) {
  const auto all = critical_sequences(torus_poset(), kP, kQ);
  const std::set<CriticalSequence> expect = {{kP, kQ}, {kP, kR, kQ}, {kP, kS, kQ}};
  EXPECT_EQ(all.size(), 3u);
  EXPECT_EQ(std::set(all.begin(), all.end()), expect);
}

TEST(Sequences, MinimalHeadGivesTheSingleton) {
  EXPECT_EQ(critical_sequences(torus_poset(), kQ), (std::vector<CriticalSequence>{{kQ}}));
  EXPECT_TRUE(critical_sequences(torus_poset(), kQ, kP).empty());
}

TEST(Stratify, TorusDiskIsAnOctagon) {
  const auto st = stratification(SpaceTag::Dbar, torus_poset(), torus_data(), kP);
  EXPECT_EQ(st.total_dim, 2);
  EXPECT_TRUE(st.cells_complete);
  EXPECT_EQ(st.components_at(0), 1);
  EXPECT_EQ(st.components_at(1), 8);
  EXPECT_EQ(st.components_at(2), 8);
  EXPECT_EQ(st.max_k(), 2);
  EXPECT_EQ(st.boundary_euler_characteristic(), 0);
  EXPECT_EQ(st.euler_characteristic(), 1);
  EXPECT_TRUE(st.faces_consistent());
  for (std::size_t c = 0; c < st.cells.size(); ++c) {
    // Every vertex of the octagon closes exactly two edges.
    if (st.cells[c].k == 2) EXPECT_EQ(st.faces[c].size(), 2u) << c;
  }
}

TEST(Stratify, TorusModuliClosureIsFourIntervals) {
  const auto st = stratification(SpaceTag::Mbar, torus_poset(), torus_data(), kP, kQ);
  EXPECT_EQ(st.total_dim, 1);
  EXPECT_EQ(st.components_at(0), 4);
  EXPECT_EQ(st.components_at(1), 8);
  EXPECT_EQ(st.euler_characteristic(), 4);
  EXPECT_TRUE(st.faces_consistent());
}

TEST(Stratify, EllipsoidModuliClosure) {
  const int top = ellipsoid_id({0, 0, 1});
  const int bottom = ellipsoid_id({1, 0, 0});
  const auto st = stratification(SpaceTag::Mbar, ellipsoid_poset(), ellipsoid_data(), top, bottom);
  EXPECT_EQ(st.total_dim, 1);
  EXPECT_EQ(st.components_at(0), 1);
  EXPECT_EQ(st.components_at(1), 2);
  EXPECT_EQ(st.euler_characteristic(), 1);
  EXPECT_TRUE(st.faces_consistent());
}

TEST(Stratify, EllipsoidDisksAndSpheres) {
  for (const auto& c : ellipsoid_crit()) {
    const auto st = stratification(SpaceTag::Dbar, ellipsoid_poset(), ellipsoid_data(), c.id);
    EXPECT_EQ(st.total_dim, c.index);
    EXPECT_EQ(st.euler_characteristic(), 1) << c.label;
    EXPECT_EQ(st.boundary_euler_characteristic(), c.index == 0 ? 0 : 1 + (c.index % 2 == 1 ? 1 : -1));
    EXPECT_TRUE(st.faces_consistent());
  }
}

TEST(Stratify, DimensionsAreAdditive) {
  for (const auto& [poset, data] : {std::pair{&torus_poset(), &torus_data()}, {&ellipsoid_poset(), &ellipsoid_data()}}) {
    for (const auto& a : data->points) {
      for (const auto& b : data->points) {
        if (!poset->succeeds(a.id, b.id)) continue;
        const auto st = stratification(SpaceTag::Mbar, *poset, *data, a.id, b.id);
        for (const auto& r : st.strata) {
          int sum = 0;
          for (std::size_t i = 0; i + 1 < r.sequence.size(); ++i) {
            sum += data->point(r.sequence[i]).index - data->point(r.sequence[i + 1]).index - 1;
          }
          EXPECT_EQ(r.dim, sum);
          EXPECT_EQ(r.dim, st.total_dim - r.k);
        }
      }
    }
  }
}

TEST(Stratify, UnstableManifoldClosure) {
  const auto st = stratification(SpaceTag::Wbar, torus_poset(), torus_data(), kP, kQ);
  EXPECT_EQ(st.total_dim, 2);
  EXPECT_EQ(st.components_at(0), 4);
  for (const auto& r : st.strata) {
    EXPECT_GE(r.s, 0);
    EXPECT_EQ(r.dim, 2 - r.k);
  }
}

TEST(Stratify, TailRules) {
  EXPECT_THROW(stratification(SpaceTag::Dbar, torus_poset(), torus_data(), kP, kQ), PreconditionError);
  EXPECT_THROW(stratification(SpaceTag::Mbar, torus_poset(), torus_data(), kP), PreconditionError);
  EXPECT_THROW(stratification(SpaceTag::Wbar, torus_poset(), torus_data(), kP), PreconditionError);
  EXPECT_THROW(stratification(SpaceTag::Dbar, torus_poset(), torus_data(), 9), DescriptorError);
}

TEST(Stratify, UnknownCountsLeaveCellsIncomplete) {
  ModuliData d = torus_data();
  d.component_count.clear();
  const auto st = stratification(SpaceTag::Mbar, torus_poset(), d, kP, kQ);
  EXPECT_FALSE(st.cells_complete);
  EXPECT_EQ(st.components_at(1), 8);
}

TEST(Evaluate, BrokenLineThroughR) {
  const std::vector<FlowLinePiece> line = {{kP, kR, pt(kPi / 2, 0.0)}, {kR, kQ, pt(kPi, kPi / 2)}};
  const auto xs = evaluate_on_levels(torus(), torus_crit(), line, {1.0, -1.0});
  ASSERT_EQ(xs.size(), 2u);
  EXPECT_LT(dist(torus(), xs[0], pt(kPi / 2, 0.0)), 1e-8);
  EXPECT_LT(dist(torus(), xs[1], pt(kPi, kPi / 2)), 1e-8);
}

TEST(Evaluate, UnbrokenDiagonal) {
  const std::vector<FlowLinePiece> line = {{kP, kQ, pt(kPi / 3, kPi / 3)}};
  const auto xs = evaluate_on_levels(torus(), torus_crit(), line, {1.0, -1.0});
  EXPECT_LT(dist(torus(), xs[0], pt(kPi / 3, kPi / 3)), 1e-8);
  EXPECT_LT(dist(torus(), xs[1], pt(2 * kPi / 3, 2 * kPi / 3)), 1e-8);
  const auto mid = evaluate_on_levels(torus(), torus_crit(), line, {1.5, 0.5, -0.5});
  ASSERT_EQ(mid.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(torus().value(mid[i]), 1.5 - i, 1e-10);
}

TEST(Evaluate, TorusTuplesAreInjective) {
  auto& solver = torus_solver();
  std::vector<std::vector<ManifoldPoint>> tuples;
  for (const auto& comp : solver.moduli_curve(kP, kQ).components) {
    const ManifoldPoint& x = comp.polyline[comp.polyline.size() / 2];
    tuples.push_back(evaluate_on_levels(torus(), torus_crit(), {{kP, kQ, x}}, {1.0, -1.0}));
  }
  for (int r : {kR, kS}) {
    for (const auto& a : solver.connecting_orbits(kP, r)) {
      for (const auto& b : solver.connecting_orbits(r, kQ)) {
        tuples.push_back(evaluate_on_levels(torus(), torus_crit(),
                                            {{kP, r, a.representative}, {r, kQ, b.representative}}, {1.0, -1.0}));
      }
    }
  }
  ASSERT_EQ(tuples.size(), 12u);
  EXPECT_GT(min_tuple_separation(torus().atlas(), tuples), 1e-3);
}

TEST(Evaluate, Errors) {
  const std::vector<FlowLinePiece> line = {{kP, kQ, pt(kPi / 3, kPi / 3)}};
  EXPECT_THROW(evaluate_on_levels(torus(), torus_crit(), line, {1.0, 0.0}), LevelError);
  EXPECT_THROW(evaluate_on_levels(torus(), torus_crit(), line, {1.0, 5e-10}), LevelError);
  EXPECT_THROW(evaluate_on_levels(torus(), torus_crit(), line, {2.5}), LevelError);
  const std::vector<FlowLinePiece> gap = {{kP, kR, pt(kPi / 2, 0.0)}, {kS, kQ, pt(kPi / 2, kPi)}};
  EXPECT_THROW(evaluate_on_levels(torus(), torus_crit(), gap, {1.0}), PreconditionError);
}

}  // namespace
