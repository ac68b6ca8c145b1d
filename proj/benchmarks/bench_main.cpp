#include "bvflow/cost.hpp"
#include "bvflow/critical.hpp"
#include "bvflow/energy.hpp"
#include "bvflow/flow.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace bvflow;

EnergyModel builtin(const char* family) { return make_builtin(family, default_params(family)); }

Vec point(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// Argument is -log10(eps), so 1..3 covers the usual ladder.
void BM_Integrate(benchmark::State& state) {
  const auto m = builtin("tilted_double_well");
  double eps = 1.0;
  for (int k = 0; k < state.range(0); ++k) eps /= 10.0;
  std::size_t nodes = 0;
  for (auto _ : state) {
    const auto tr = integrate(m, eps, point({-1.0}), {0.0, 1.0});
    nodes = tr.size();
    benchmark::DoNotOptimize(nodes);
  }
  state.counters["nodes"] = static_cast<double>(nodes);
}
BENCHMARK(BM_Integrate)->DenseRange(1, 3)->Unit(benchmark::kMillisecond);

void BM_FindCritical(benchmark::State& state) {
  const auto m = builtin("double_well_2d");
  const auto box = Box::centered(2, 2.0);
  for (auto _ : state) {
    auto set = find_critical(m, 0.0, box, static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(set.points.data());
  }
}
BENCHMARK(BM_FindCritical)->RangeMultiplier(4)->Range(16, 256)->Unit(benchmark::kMicrosecond);

void BM_CostGrid2D(benchmark::State& state) {
  const auto m = builtin("double_well_2d");
  const double spacing = 1.0 / static_cast<double>(state.range(0));
  for (auto _ : state) {
    const auto c = cost_grid(m, 0.0, point({-1.0, 0.0}), point({1.0, 0.0}), {Box::centered(2, 2.0), spacing});
    benchmark::DoNotOptimize(c.value);
  }
  state.counters["nodes_per_axis"] = 4.0 / spacing + 1.0;
}
BENCHMARK(BM_CostGrid2D)->RangeMultiplier(2)->Range(16, 128)->Unit(benchmark::kMillisecond);

void BM_Cost1D(benchmark::State& state) {
  const auto m = builtin("tilted_double_well");
  for (auto _ : state) benchmark::DoNotOptimize(cost_1d(m, 0.3, -1.0, 1.2).value);
}
BENCHMARK(BM_Cost1D);

}  // namespace

BENCHMARK_MAIN();
