#include <random>

#include <benchmark/benchmark.h>

#include "morseflow/corner.hpp"
#include "morseflow/cp2gap.hpp"
#include "morseflow/homology.hpp"
#include "morseflow/pipeline.hpp"

namespace {

using namespace morseflow;

const MorseSystem& torus() {
  static const MorseSystem s = make_builtin_system("flat-torus");
  return s;
}

void BM_IntegrateToMinimum(benchmark::State& state) {
  const auto crit = find_critical_points(torus());
  Vec x(2);
  x << 1.0, 0.4;
  for (auto _ : state) {
    auto tr = integrate(torus(), {0, x}, {}, {}, &crit);
    benchmark::DoNotOptimize(tr.energy);
  }
}
BENCHMARK(BM_IntegrateToMinimum)->Unit(benchmark::kMicrosecond);

void BM_IntegrateWithDerivative(benchmark::State& state) {
  Vec x(2);
  x << 1.0, 0.4;
  for (auto _ : state) {
    auto tr = integrate(torus(), {0, x}, StopCondition::at_level(-1.0), {}, nullptr, 1, true);
    benchmark::DoNotOptimize(tr.derivative.data());
  }
}
BENCHMARK(BM_IntegrateWithDerivative)->Unit(benchmark::kMicrosecond);

void BM_ConnectingOrbits(benchmark::State& state) {
  const auto crit = find_critical_points(torus());
  ModuliOptions opts;
  opts.mesh = static_cast<int>(state.range(0));
  for (auto _ : state) {
    ModuliSolver solver(torus(), crit, opts);
    benchmark::DoNotOptimize(solver.connecting_orbits(0, 2).size());
  }
}
BENCHMARK(BM_ConnectingOrbits)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_SmithInvariants(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> u(-3, 3);
  IntMat m(n, n);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  for (auto _ : state) {
    try {
      benchmark::DoNotOptimize(smith_invariants(m).size());
    } catch (const std::overflow_error&) {
      state.SkipWithError("overflow");
      break;
    }
  }
}
BENCHMARK(BM_SmithInvariants)->Arg(4)->Arg(8)->Arg(12);

void BM_CornerCheck(benchmark::State& state) {
  const CornerChart chart = corner_chart(CornerVariant::p_corner, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(corner_check(chart, 1000).max_round_trip_error);
}
BENCHMARK(BM_CornerCheck)->Unit(benchmark::kMillisecond);

void BM_Cp2Connect(benchmark::State& state) {
  Vec v(4);
  v << 0.3, -0.2, 0.9, 0.6;
  v.tail(2) *= std::sqrt(1.0 + v.head(2).squaredNorm()) / v.tail(2).norm();
  for (auto _ : state) benchmark::DoNotOptimize(cp2_connect_levels(v).data());
}
BENCHMARK(BM_Cp2Connect);

void BM_TorusPipeline(benchmark::State& state) {
  const PipelineConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(run_pipeline(cfg).ok());
}
BENCHMARK(BM_TorusPipeline)->Unit(benchmark::kSecond)->Iterations(1);

}  // namespace

BENCHMARK_MAIN();
