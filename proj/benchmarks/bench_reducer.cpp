#include <benchmark/benchmark.h>

#include <random>

#include "recprompt/reducer.hpp"

namespace {

std::vector<double> gaussian(std::size_t n, std::size_t d) {
  std::mt19937_64 rng(n ^ d);
  std::normal_distribution<double> g;
  std::vector<double> x(n * d);
  for (auto& v : x) v = g(rng);
  return x;
}

void BM_FitPca(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  const auto solver = static_cast<recprompt::PcaSolver>(state.range(2));
  const auto x = gaussian(n, d);
  for (auto _ : state) benchmark::DoNotOptimize(recprompt::fit_pca(x, n, d, d / 4, solver));
}
BENCHMARK(BM_FitPca)
    ->Args({2000, 128, static_cast<int>(recprompt::PcaSolver::kCovariance)})
    ->Args({2000, 128, static_cast<int>(recprompt::PcaSolver::kSvd)})
    ->Args({4000, 512, static_cast<int>(recprompt::PcaSolver::kCovariance)})
    ->Unit(benchmark::kMillisecond);

void BM_Project(benchmark::State& state) {
  const std::size_t d = 1024;
  const auto x = gaussian(600, d);
  const auto m = recprompt::fit_pca(x, 600, d, 512);
  const std::span<const double> row(x.data(), d);
  for (auto _ : state) benchmark::DoNotOptimize(recprompt::project(m, row));
}
BENCHMARK(BM_Project);

}  // namespace

BENCHMARK_MAIN();
