#include <benchmark/benchmark.h>

#include <random>

#include "recprompt/evaluation.hpp"

namespace {

std::vector<recprompt::ScoredLabel> scores(std::size_t n) {
  std::mt19937_64 rng(n);
  std::uniform_real_distribution<double> u;
  std::vector<recprompt::ScoredLabel> s(n);
  for (auto& x : s) x = {u(rng), u(rng) < 0.4};
  return s;
}

void BM_Auc(benchmark::State& state) {
  const auto s = scores(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(recprompt::compute_auc(s));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Auc)->Arg(1000)->Arg(100000)->Arg(1000000);

void BM_AucPairwise(benchmark::State& state) {
  const auto s = scores(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(recprompt::compute_auc_pairwise(s));
}
BENCHMARK(BM_AucPairwise)->Arg(1000)->Arg(5000);

void BM_Logloss(benchmark::State& state) {
  const auto s = scores(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(recprompt::compute_logloss_acc(s));
}
BENCHMARK(BM_Logloss)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
