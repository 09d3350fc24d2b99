#include "recprompt/retrieval.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>

#include "recprompt/error.hpp"

namespace recprompt {
namespace {

RetrievedHistory window_from_indices(std::span<const Interaction> history,
                                     std::span<const std::size_t> indices,
                                     std::span<const double> scores) {
  RetrievedHistory out;
  out.entries.reserve(indices.size());
  for (const auto i : indices) {
    out.entries.push_back(RetrievedEntry{i, history[i].item_id, history[i].label,
                                         scores.empty() ? 0.0 : scores[i]});
  }
  return out;
}

}  // namespace

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::kCosine:
      return "cosine";
    case Metric::kL2:
      return "l2";
    case Metric::kL1:
      return "l1";
  }
  return "unknown";
}

Metric parse_metric(std::string_view name) {
  if (name == "cosine") return Metric::kCosine;
  if (name == "l2") return Metric::kL2;
  if (name == "l1") return Metric::kL1;
  throw_config_error(fmt::format("unknown metric '{}'", name));
}

void RetrievalConfig::validate() const {
  if (k == 0) throw_config_error("retrieval K must be at least 1");
}

std::vector<std::size_t> RetrievedHistory::indices() const {
  std::vector<std::size_t> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.history_index);
  return out;
}

std::vector<std::string> RetrievedHistory::item_ids() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.item_id);
  return out;
}

double relevance(std::span<const float> a, std::span<const float> b, Metric metric,
                 RetrievalDiagnostics* diagnostics) {
  if (a.size() != b.size()) {
    throw_data_error(fmt::format("relevance between {}-dim and {}-dim vectors", a.size(),
                                 b.size()));
  }
  switch (metric) {
    case Metric::kCosine: {
      double dot = 0.0;
      double na = 0.0;
      double nb = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i];
        const double y = b[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
      }
      if (na == 0.0 || nb == 0.0) {
        if (diagnostics != nullptr) ++diagnostics->zero_vector_cosines;
        return 0.0;
      }
      return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
    }
    case Metric::kL2: {
      double sum = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        sum += diff * diff;
      }
      return -std::sqrt(sum);
    }
    case Metric::kL1: {
      double sum = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        sum += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
      }
      return -sum;
    }
  }
  return 0.0;
}

VectorStore::VectorStore(VectorTable table) : table_(std::move(table)) {
  table_.validate();
  index_.reserve(table_.rows());
  for (std::size_t i = 0; i < table_.rows(); ++i) {
    if (!index_.emplace(table_.ids[i], i).second) {
      throw_data_error(fmt::format("duplicate vector for item {}", table_.ids[i]));
    }
  }
}

bool VectorStore::contains(std::string_view item_id) const {
  return index_.find(item_id) != index_.end();
}

std::span<const float> VectorStore::at(std::string_view item_id) const {
  const auto it = index_.find(item_id);
  if (it == index_.end()) throw_data_error(fmt::format("missing vector for item {}", item_id));
  return table_.row(it->second);
}

std::vector<double> history_relevance(std::span<const Interaction> history,
                                      std::string_view target_item_id,
                                      const VectorStore& vectors, Metric metric,
                                      RetrievalDiagnostics* diagnostics) {
  const auto target = vectors.at(target_item_id);
  std::vector<double> scores(history.size());
  for (std::size_t i = 0; i < history.size(); ++i) {
    scores[i] = relevance(vectors.at(history[i].item_id), target, metric, diagnostics);
  }
  return scores;
}

std::vector<std::size_t> select_top_k(std::span<const double> scores, std::size_t k) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (k < order.size()) {
    const auto more_relevant = [&](std::size_t a, std::size_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return a > b;
    };
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                     order.end(), more_relevant);
    order.resize(k);
    std::sort(order.begin(), order.end());
  }
  return order;
}

RetrievedHistory subr_top_k(std::span<const Interaction> history,
                            std::string_view target_item_id, const VectorStore& vectors,
                            const RetrievalConfig& config, RetrievalDiagnostics* diagnostics) {
  config.validate();
  const auto scores =
      history_relevance(history, target_item_id, vectors, config.metric, diagnostics);
  const auto chosen = select_top_k(scores, config.k);
  return window_from_indices(history, chosen, scores);
}

RetrievedHistory subr_top_k(const Corpus& corpus, const Sample& sample,
                            const VectorStore& vectors, const RetrievalConfig& config,
                            RetrievalDiagnostics* diagnostics) {
  return subr_top_k(corpus.history(sample), corpus.target_event(sample).item_id, vectors,
                    config, diagnostics);
}

RetrievedHistory top_recent(std::span<const Interaction> history, std::size_t k) {
  const std::size_t n = std::min(k, history.size());
  std::vector<std::size_t> indices(n);
  std::iota(indices.begin(), indices.end(), history.size() - n);
  return window_from_indices(history, indices, {});
}

RetrievedHistory top_recent(const Corpus& corpus, const Sample& sample, std::size_t k) {
  return top_recent(corpus.history(sample), k);
}

RetrievedHistory brute_force_oracle(std::span<const Interaction> history,
                                    std::string_view target_item_id,
                                    const VectorStore& vectors, const RetrievalConfig& config) {
  config.validate();
  const auto target = vectors.at(target_item_id);
  struct Scored {
    std::size_t index;
    double score;
  };
  // Newest first, so the stable sort keeps recency as the tie-break.
  std::vector<Scored> all;
  for (std::size_t i = history.size(); i-- > 0;) {
    all.push_back({i, relevance(vectors.at(history[i].item_id), target, config.metric)});
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const Scored& a, const Scored& b) { return a.score > b.score; });
  if (all.size() > config.k) all.resize(config.k);
  std::sort(all.begin(), all.end(),
            [](const Scored& a, const Scored& b) { return a.index < b.index; });
  RetrievedHistory out;
  for (const auto& s : all) {
    out.entries.push_back(
        RetrievedEntry{s.index, history[s.index].item_id, history[s.index].label, s.score});
  }
  return out;
}

void write_retrieval_sidecar(
    const std::filesystem::path& path,
    std::span<const std::pair<std::int64_t, RetrievedHistory>> results) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_data_error(fmt::format("cannot write {}", path.string()));
  for (const auto& [sample_id, window] : results) {
    nlohmann::ordered_json j;
    j["sample_id"] = sample_id;
    j["indices"] = window.indices();
    auto& scores = j["scores"] = nlohmann::ordered_json::array();
    for (const auto& e : window.entries) scores.push_back(e.relevance);
    out << j.dump() << '\n';
  }
}

std::vector<std::pair<std::int64_t, std::vector<std::pair<std::size_t, double>>>>
read_retrieval_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data_error(fmt::format("cannot open {}", path.string()));
  std::vector<std::pair<std::int64_t, std::vector<std::pair<std::size_t, double>>>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto indices = j.at("indices").get<std::vector<std::size_t>>();
      const auto scores = j.at("scores").get<std::vector<double>>();
      if (indices.size() != scores.size()) {
        throw_data_error(fmt::format("{}: indices/scores length mismatch", path.string()));
      }
      std::vector<std::pair<std::size_t, double>> entries;
      for (std::size_t i = 0; i < indices.size(); ++i) entries.emplace_back(indices[i], scores[i]);
      out.emplace_back(j.at("sample_id").get<std::int64_t>(), std::move(entries));
    } catch (const nlohmann::json::exception& e) {
      throw_data_error(fmt::format("{}: {}", path.string(), e.what()));
    }
  }
  return out;
}

}  // namespace recprompt
