#include <benchmark/benchmark.h>

#include <cmath>

#include "tsirelson/brownian.hpp"
#include "tsirelson/chaos.hpp"
#include "tsirelson/conditional.hpp"
#include "tsirelson/filter.hpp"
#include "tsirelson/spectral.hpp"

using namespace tsirelson;

namespace {

DriftSpec feedback(double a) {
  return DriftSpec::state_feedback([a](double, double x) { return a * x; }, std::abs(a));
}

void BM_SampleBrownian(benchmark::State& state) {
  const TimeGrid grid(static_cast<std::size_t>(state.range(0)));
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_brownian(grid, RngStream(1, i++)));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SampleBrownian)->Arg(256)->Arg(1024)->Arg(4096);

void BM_EnsembleRecord(benchmark::State& state) {
  const TimeGrid grid(1024);
  const FilterEnsemble ensemble(feedback(-0.5), grid, 1u << 30, 2);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(ensemble.record(i++));
}
BENCHMARK(BM_EnsembleRecord);

void BM_FixedPointInversion(benchmark::State& state) {
  const TimeGrid grid(1024);
  const double a = static_cast<double>(state.range(0));
  const auto drift = feedback(a);
  const auto y = apply_filter(drift, sample_brownian(grid, RngStream(3, 0)));
  for (auto _ : state) benchmark::DoNotOptimize(reconstruct_input_fixed_point(drift, y));
}
BENCHMARK(BM_FixedPointInversion)->Arg(1)->Arg(4);

void BM_RegressionProjection(benchmark::State& state) {
  const TimeGrid grid(256);
  const FilterEnsemble ensemble(feedback(-0.5), grid, static_cast<std::size_t>(state.range(0)), 4);
  RegressionOptions options;
  options.workers = 1;
  for (auto _ : state) benchmark::DoNotOptimize(project_regression(ensemble, 0, options));
}
BENCHMARK(BM_RegressionProjection)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_Lemma1Logs(benchmark::State& state) {
  const TimeGrid grid(1024);
  const auto drift = DriftSpec::deterministic(
      CameronMartinPath::from_derivative(grid, [](double t) { return std::sin(t); }));
  const FilterEnsemble ensemble(drift, grid, 1000, 5);
  const auto projected = project_deterministic(drift, grid);
  for (auto _ : state) benchmark::DoNotOptimize(lemma1_logs(ensemble, projected, 0, 1024, 1));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_Lemma1Logs)->Unit(benchmark::kMillisecond);

void BM_SubsetMass(benchmark::State& state) {
  const TimeGrid grid(1024);
  const auto chaos = exponential_chaos(4.0, 40);
  const auto region = IntervalUnion::make(grid, {{0.1, 0.3}, {0.5, 0.9}});
  for (auto _ : state) benchmark::DoNotOptimize(subset_mass(chaos, region));
}
BENCHMARK(BM_SubsetMass);

}  // namespace
BENCHMARK_MAIN();
