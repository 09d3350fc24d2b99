#pragma once

#include <atomic>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "recprompt/corpus.hpp"
#include "recprompt/prompting.hpp"
#include "recprompt/retrieval.hpp"
#include "recprompt/scoring.hpp"

namespace recprompt {

struct ScoredLabel {
  double y_hat = 0.0;
  bool label = false;
};

// Probability that a random positive outranks a random negative, ties 1/2.
// Tie-averaged rank formula in integer arithmetic. Single-class input is a
// data error.
double compute_auc(std::span<const ScoredLabel> scores);

// Exhaustive pair counting; O(n^2), for tests and small inputs.
double compute_auc_pairwise(std::span<const ScoredLabel> scores);

struct LoglossAcc {
  double logloss = 0.0;
  double acc = 0.0;
};

// Predictions are clamped to [1e-12, 1 - 1e-12]; acc counts (y_hat >= threshold) == label.
LoglossAcc compute_logloss_acc(std::span<const ScoredLabel> scores, double threshold = 0.5);

struct MetricsReport {
  double auc = 0.0;
  double logloss = 0.0;
  double acc = 0.0;
  std::size_t n = 0;
  std::size_t degraded_count = 0;
};

// Joins logits with the test entries by sample id. Every entry needs exactly
// one logit pair and vice versa.
MetricsReport evaluate_logits(const ScoredLogits& logits, std::span<const RenderedPair> test);

std::string to_json(const MetricsReport& report);
std::string to_text_table(const MetricsReport& report);

struct HeterogeneityDiagnostics {
  std::atomic<std::size_t> items_without_genres{0};
};

// Distinct normalized genre tokens across the window's items. Items with no
// genres contribute nothing and are counted.
std::size_t heterogeneity_score(const RetrievedHistory& window, const Corpus& corpus,
                                HeterogeneityDiagnostics* diagnostics = nullptr);

enum class Population { kAll, kTrain, kTest };

std::string_view to_string(Population population);
Population parse_population(std::string_view name);

struct HeterogeneityRow {
  std::size_t k = 0;
  double mean_recent = 0.0;
  double mean_retrieved = 0.0;
  std::size_t n_samples = 0;
  // Samples whose history is shorter than k; included as-is.
  std::size_t short_windows = 0;
};

struct HeterogeneityTable {
  std::vector<HeterogeneityRow> rows;
  Population population = Population::kAll;
  Metric metric = Metric::kCosine;
  std::size_t items_without_genres = 0;
};

// Mean heterogeneity of top_recent and subr_top_k windows for each k.
// Relevance is computed once per sample and shared across k. Datasets
// without genres are a config error.
HeterogeneityTable heterogeneity_table(const Corpus& corpus, const VectorStore& vectors,
                                       std::span<const std::size_t> ks, Metric metric,
                                       Population population = Population::kAll);

std::string to_json(const HeterogeneityTable& table);
std::string to_text_table(const HeterogeneityTable& table);
// Header: k,mean_recent,mean_retrieved,n
std::string to_csv(const HeterogeneityTable& table);

}  // namespace recprompt
