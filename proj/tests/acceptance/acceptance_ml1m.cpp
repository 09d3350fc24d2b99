// Acceptance criteria that need the real MovieLens-1M files.
// Set RECPROMPT_ML1M_DIR to the extracted ml-1m directory (ratings.dat, movies.dat,
// users.dat). Without it every criterion is reported as SKIP and the binary
// exits with 77.

#include <fmt/format.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <optional>

#include "report.hpp"
#include "recprompt/corpus.hpp"
#include "recprompt/encoder.hpp"
#include "recprompt/evaluation.hpp"
#include "recprompt/prompting.hpp"
#include "recprompt/retrieval.hpp"

using namespace recprompt;
using namespace recprompt::acceptance;

namespace {

constexpr std::size_t kExpectedSamples = 970009;
constexpr std::array<double, 6> kExpectedRecent = {2.91, 4.19, 5.09, 5.80, 6.39, 6.90};
constexpr double kRecentTolerance = 0.2;
constexpr double kMinReductionAtK30 = 0.05;

struct State {
  std::optional<Corpus> corpus;
  std::optional<VectorStore> vectors;
  std::optional<HeterogeneityTable> table;
};

Outcome criterion_samples(const std::filesystem::path& dir, State& st) {
  auto parsed = parse_dataset(DatasetKind::kMovieLens1M,
                              DatasetPaths::in_directory(DatasetKind::kMovieLens1M, dir));
  st.corpus = Corpus::from_parsed(std::move(parsed));
  const auto n = st.corpus->samples().size();
  const auto test = st.corpus->samples_in(Split::kTest).size();
  const auto detail = fmt::format("{} samples (expected {}), {} test", n, kExpectedSamples, test);
  return n == kExpectedSamples ? pass(detail) : fail(detail);
}

Outcome criterion_recent(State& st) {
  if (!st.corpus) return fail("corpus unavailable");
  const auto& corpus = *st.corpus;
  BuiltinBackend backend(corpus.catalog(), BuiltinMode::kGenreIndicator, {});
  st.vectors.emplace(
      acquire_embeddings(render_item_descriptions(corpus.catalog(), corpus.kind()), backend));
  const std::array<std::size_t, 6> ks = {5, 10, 15, 20, 25, 30};
  st.table = heterogeneity_table(corpus, *st.vectors, ks, Metric::kCosine, Population::kAll);

  bool ok = true;
  std::string detail = "recent";
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double got = st.table->rows[i].mean_recent;
    ok = ok && std::abs(got - kExpectedRecent[i]) <= kRecentTolerance;
    detail += fmt::format(" K{}={:.2f}/{:.2f}", ks[i], got, kExpectedRecent[i]);
  }
  return ok ? pass(detail) : fail(detail);
}

Outcome criterion_retrieved(const State& st) {
  if (!st.table) return fail("heterogeneity table unavailable");
  bool ok = true;
  std::string detail = "retrieved/recent";
  for (const auto& row : st.table->rows) {
    ok = ok && row.mean_retrieved < row.mean_recent;
    detail += fmt::format(" K{}={:.2f}/{:.2f}", row.k, row.mean_retrieved, row.mean_recent);
  }
  const auto& last = st.table->rows.back();
  const double reduction = 1.0 - last.mean_retrieved / last.mean_recent;
  ok = ok && reduction >= kMinReductionAtK30;
  detail += fmt::format("; reduction at K{} {:.1f}%", last.k, 100 * reduction);
  return ok ? pass(detail) : fail(detail);
}

}  // namespace

int main() {
  Report report;
  const char* env = std::getenv("RECPROMPT_ML1M_DIR");
  if (env == nullptr || *env == '\0' || !std::filesystem::exists(env)) {
    const auto why = skip("RECPROMPT_ML1M_DIR not set or missing; real ML-1M files unavailable");
    report.record(5, "ML-1M sample count", why);
    report.record(6, "ML-1M top-recent heterogeneity", why);
    report.record(7, "ML-1M genre retrieval heterogeneity reduction", why);
    return report.exit_code();
  }
  const std::filesystem::path dir(env);
  State st;
  report.run(5, "ML-1M sample count", 120, [&] { return criterion_samples(dir, st); });
  report.run(6, "ML-1M top-recent heterogeneity", 300, [&] { return criterion_recent(st); });
  report.run(7, "ML-1M genre retrieval heterogeneity reduction", 0,
             [&] { return criterion_retrieved(st); });
  return report.exit_code();
}
