#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "recprompt/corpus.hpp"
#include "recprompt/vectors.hpp"

namespace recprompt {

enum class Metric { kCosine, kL2, kL1 };

std::string_view to_string(Metric metric);
Metric parse_metric(std::string_view name);

struct RetrievalConfig {
  std::size_t k = 30;
  Metric metric = Metric::kCosine;

  // Throws a config error when k == 0.
  void validate() const;
};

struct RetrievedEntry {
  std::size_t history_index = 0;
  std::string item_id;
  bool label = false;
  double relevance = 0.0;  // 0 for recency windows

  friend bool operator==(const RetrievedEntry&, const RetrievedEntry&) = default;
};

// Window over a sample's history, always in chronological order.
struct RetrievedHistory {
  std::vector<RetrievedEntry> entries;

  std::vector<std::size_t> indices() const;
  std::vector<std::string> item_ids() const;

  friend bool operator==(const RetrievedHistory&, const RetrievedHistory&) = default;
};

struct RetrievalDiagnostics {
  std::atomic<std::size_t> zero_vector_cosines{0};
};

// Higher is more relevant: cosine similarity, or the negated L2 / L1
// distance. Cosine against a zero vector is defined as 0 and counted.
double relevance(std::span<const float> a, std::span<const float> b, Metric metric,
                 RetrievalDiagnostics* diagnostics = nullptr);

// Immutable id -> vector lookup over a VectorTable.
class VectorStore {
 public:
  VectorStore() = default;
  explicit VectorStore(VectorTable table);

  std::size_t dim() const noexcept { return table_.dim; }
  std::size_t size() const noexcept { return table_.rows(); }
  const VectorTable& table() const noexcept { return table_; }

  bool contains(std::string_view item_id) const;
  // Throws a data error naming the item when it has no vector.
  std::span<const float> at(std::string_view item_id) const;

 private:
  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };

  VectorTable table_;
  std::unordered_map<std::string, std::size_t, StringHash, std::equal_to<>> index_;
};

// Relevance of every history event toward the target, in history order.
std::vector<double> history_relevance(std::span<const Interaction> history,
                                      std::string_view target_item_id,
                                      const VectorStore& vectors, Metric metric,
                                      RetrievalDiagnostics* diagnostics = nullptr);

// Indices of the k highest scores; ties go to the larger index. Returned in
// ascending index order.
std::vector<std::size_t> select_top_k(std::span<const double> scores, std::size_t k);

// Top-K most relevant history events toward the target, re-emitted in
// chronological order. Liked and disliked events are both eligible.
RetrievedHistory subr_top_k(std::span<const Interaction> history,
                            std::string_view target_item_id, const VectorStore& vectors,
                            const RetrievalConfig& config,
                            RetrievalDiagnostics* diagnostics = nullptr);
RetrievedHistory subr_top_k(const Corpus& corpus, const Sample& sample,
                            const VectorStore& vectors, const RetrievalConfig& config,
                            RetrievalDiagnostics* diagnostics = nullptr);

// The last min(k, len) history events.
RetrievedHistory top_recent(std::span<const Interaction> history, std::size_t k);
RetrievedHistory top_recent(const Corpus& corpus, const Sample& sample, std::size_t k);

// Exhaustive reference for subr_top_k: scores everything, stable-sorts, and
// takes the head. Same contract, independent code path.
RetrievedHistory brute_force_oracle(std::span<const Interaction> history,
                                    std::string_view target_item_id,
                                    const VectorStore& vectors, const RetrievalConfig& config);

// Sidecar cache: one {"sample_id", "indices", "scores"} object per line.
void write_retrieval_sidecar(
    const std::filesystem::path& path,
    std::span<const std::pair<std::int64_t, RetrievedHistory>> results);
std::vector<std::pair<std::int64_t, std::vector<std::pair<std::size_t, double>>>>
read_retrieval_sidecar(const std::filesystem::path& path);

}  // namespace recprompt
