#include <benchmark/benchmark.h>

#include <fmt/format.h>

#include <random>

#include "recprompt/retrieval.hpp"

namespace {

struct Instance {
  std::vector<recprompt::Interaction> history;
  recprompt::VectorStore vectors;
  std::string target;
};

Instance make_instance(std::size_t len, std::size_t dim) {
  std::mt19937_64 rng(len * 31 + dim);
  std::normal_distribution<float> g;
  recprompt::VectorTable t;
  t.dim = dim;
  Instance inst;
  for (std::size_t i = 0; i <= len; ++i) {
    const auto id = fmt::format("i{}", i);
    t.ids.push_back(id);
    for (std::size_t j = 0; j < dim; ++j) t.values.push_back(g(rng));
    if (i < len) inst.history.push_back({"u", id, 4.0, static_cast<std::int64_t>(i), true});
  }
  inst.target = t.ids.back();
  inst.vectors = recprompt::VectorStore(std::move(t));
  return inst;
}

void BM_SubrTopK(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const auto dim = static_cast<std::size_t>(state.range(1));
  const auto inst = make_instance(len, dim);
  recprompt::RetrievalConfig cfg;
  cfg.k = 30;
  for (auto _ : state) {
    benchmark::DoNotOptimize(recprompt::subr_top_k(inst.history, inst.target, inst.vectors, cfg));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(len));
}
BENCHMARK(BM_SubrTopK)->Args({100, 18})->Args({1000, 18})->Args({1000, 512})->Args({5000, 512});

void BM_TopRecent(benchmark::State& state) {
  const auto inst = make_instance(static_cast<std::size_t>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(recprompt::top_recent(inst.history, 30));
}
BENCHMARK(BM_TopRecent)->Arg(100)->Arg(5000);

}  // namespace

BENCHMARK_MAIN();
