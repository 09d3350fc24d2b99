#include "recprompt/evaluation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <set>
#include <thread>
#include <unordered_map>

#include "recprompt/error.hpp"
#include "recprompt/http.hpp"

namespace recprompt {
namespace {

void count_classes(std::span<const ScoredLabel> scores, std::uint64_t& pos, std::uint64_t& neg) {
  pos = 0;
  neg = 0;
  for (const auto& s : scores) {
    if (std::isnan(s.y_hat)) throw_data_error("AUC input contains NaN");
    (s.label ? pos : neg) += 1;
  }
  if (pos == 0 || neg == 0) throw_data_error("AUC needs at least one positive and one negative");
}

}  // namespace

double compute_auc(std::span<const ScoredLabel> scores) {
  std::uint64_t pos = 0;
  std::uint64_t neg = 0;
  count_classes(scores, pos, neg);

  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a].y_hat < scores[b].y_hat; });

  // Twice the positives' tie-averaged rank sum stays an integer.
  std::uint64_t twice_rank_sum = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::uint64_t group_pos = 0;
    while (j < order.size() && scores[order[j]].y_hat == scores[order[i]].y_hat) {
      group_pos += scores[order[j]].label ? 1 : 0;
      ++j;
    }
    // Ranks i+1 .. j average to (i + 1 + j) / 2.
    twice_rank_sum += group_pos * (i + 1 + j);
    i = j;
  }
  const std::uint64_t twice_u = twice_rank_sum - pos * (pos + 1);
  return static_cast<double>(twice_u) / static_cast<double>(2 * pos * neg);
}

double compute_auc_pairwise(std::span<const ScoredLabel> scores) {
  std::uint64_t pos = 0;
  std::uint64_t neg = 0;
  count_classes(scores, pos, neg);
  std::uint64_t twice = 0;
  for (const auto& p : scores) {
    if (!p.label) continue;
    for (const auto& q : scores) {
      if (q.label) continue;
      if (p.y_hat > q.y_hat) {
        twice += 2;
      } else if (p.y_hat == q.y_hat) {
        twice += 1;
      }
    }
  }
  return static_cast<double>(twice) / static_cast<double>(2 * pos * neg);
}

LoglossAcc compute_logloss_acc(std::span<const ScoredLabel> scores, double threshold) {
  if (scores.empty()) throw_data_error("log loss of an empty score list");
  constexpr double kEps = 1e-12;
  double loss = 0.0;
  std::size_t correct = 0;
  for (const auto& s : scores) {
    if (std::isnan(s.y_hat)) throw_data_error("log loss input contains NaN");
    const double p = std::clamp(s.y_hat, kEps, 1.0 - kEps);
    loss -= s.label ? std::log(p) : std::log1p(-p);
    if ((s.y_hat >= threshold) == s.label) ++correct;
  }
  const auto n = static_cast<double>(scores.size());
  return {loss / n, static_cast<double>(correct) / n};
}

MetricsReport evaluate_logits(const ScoredLogits& logits, std::span<const RenderedPair> test) {
  std::unordered_map<std::int64_t, const LogitPair*> by_id;
  by_id.reserve(logits.size());
  for (const auto& [id, lp] : logits) {
    if (!by_id.emplace(id, &lp).second) throw_data_error(fmt::format("duplicate logits for {}", id));
  }
  if (logits.size() != test.size()) {
    throw_data_error(fmt::format("{} logit pairs for {} test entries", logits.size(), test.size()));
  }
  std::vector<ScoredLabel> scored;
  scored.reserve(test.size());
  MetricsReport report;
  for (const auto& entry : test) {
    const auto it = by_id.find(entry.meta.sample_id);
    if (it == by_id.end()) {
      throw_data_error(fmt::format("no logits for test sample {}", entry.meta.sample_id));
    }
    if (it->second->degraded) ++report.degraded_count;
    scored.push_back({pointwise_score(*it->second), entry.output == kAnswerYes});
  }
  report.n = scored.size();
  report.auc = compute_auc(scored);
  const auto la = compute_logloss_acc(scored);
  report.logloss = la.logloss;
  report.acc = la.acc;
  return report;
}

std::string to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["auc"] = report.auc;
  j["logloss"] = report.logloss;
  j["acc"] = report.acc;
  j["n"] = report.n;
  j["degraded_count"] = report.degraded_count;
  return j.dump(2);
}

std::string to_text_table(const MetricsReport& report) {
  return fmt::format("{:<8} {:>10} {:>10} {:>8} {:>9}\n{:<8.6f} {:>10.6f} {:>10.6f} {:>8} {:>9}\n",
                     "auc", "logloss", "acc", "n", "degraded", report.auc, report.logloss,
                     report.acc, report.n, report.degraded_count);
}

std::size_t heterogeneity_score(const RetrievedHistory& window, const Corpus& corpus,
                                HeterogeneityDiagnostics* diagnostics) {
  std::set<std::string> genres;
  for (const auto& e : window.entries) {
    const auto& item = corpus.item(e.item_id);
    if (item.genres.empty() && diagnostics != nullptr) ++diagnostics->items_without_genres;
    for (const auto& g : item.genres) genres.insert(normalize_genre(g));
  }
  return genres.size();
}

std::string_view to_string(Population population) {
  switch (population) {
    case Population::kAll:
      return "all";
    case Population::kTrain:
      return "train";
    case Population::kTest:
      return "test";
  }
  return "unknown";
}

Population parse_population(std::string_view name) {
  if (name == "all") return Population::kAll;
  if (name == "train") return Population::kTrain;
  if (name == "test") return Population::kTest;
  throw_config_error(fmt::format("unknown population '{}'", name));
}

HeterogeneityTable heterogeneity_table(const Corpus& corpus, const VectorStore& vectors,
                                       std::span<const std::size_t> ks, Metric metric,
                                       Population population) {
  if (corpus.kind() == DatasetKind::kBookCrossing) {
    throw_config_error("heterogeneity needs genre attributes; bookcrossing has none");
  }
  for (const auto k : ks) {
    if (k == 0) throw_config_error("heterogeneity k must be positive");
  }

  std::vector<const Sample*> samples;
  for (const auto& s : corpus.samples()) {
    if (population == Population::kAll ||
        (population == Population::kTrain && s.split == Split::kTrain) ||
        (population == Population::kTest && s.split == Split::kTest)) {
      samples.push_back(&s);
    }
  }

  // Genre bitmask per catalog item; falls back to sets past 64 genres.
  std::vector<std::string> vocab;
  {
    std::set<std::string> v;
    for (const auto& item : corpus.catalog()) {
      for (const auto& g : item.genres) v.insert(normalize_genre(g));
    }
    vocab.assign(v.begin(), v.end());
  }
  const bool use_mask = vocab.size() <= 64;

  HeterogeneityDiagnostics diag;
  const std::size_t nk = ks.size();
  std::vector<std::uint32_t> recent(samples.size() * nk);
  std::vector<std::uint32_t> retrieved(samples.size() * nk);
  std::vector<std::uint8_t> is_short(samples.size() * nk);

  auto mask_of = [&](const std::string& item_id) {
    const auto& item = corpus.item(item_id);
    if (item.genres.empty()) ++diag.items_without_genres;
    std::uint64_t m = 0;
    for (const auto& g : item.genres) {
      const auto it = std::lower_bound(vocab.begin(), vocab.end(), normalize_genre(g));
      m |= std::uint64_t{1} << static_cast<unsigned>(it - vocab.begin());
    }
    return m;
  };

  const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  parallel_for(samples.size(), workers, [&](std::size_t si) {
    const Sample& sample = *samples[si];
    const auto history = corpus.history(sample);
    const auto scores =
        history_relevance(history, corpus.target(sample).item_id, vectors, metric);
    for (std::size_t ki = 0; ki < nk; ++ki) {
      const std::size_t k = ks[ki];
      const std::size_t slot = si * nk + ki;
      is_short[slot] = history.size() < k ? 1 : 0;
      const auto top = select_top_k(scores, k);
      const std::size_t start = history.size() > k ? history.size() - k : 0;
      if (use_mask) {
        std::uint64_t mr = 0;
        for (std::size_t i = start; i < history.size(); ++i) mr |= mask_of(history[i].item_id);
        std::uint64_t mt = 0;
        for (const auto i : top) mt |= mask_of(history[i].item_id);
        recent[slot] = static_cast<std::uint32_t>(std::popcount(mr));
        retrieved[slot] = static_cast<std::uint32_t>(std::popcount(mt));
      } else {
        recent[slot] = static_cast<std::uint32_t>(
            heterogeneity_score(top_recent(history, k), corpus, &diag));
        RetrievedHistory w;
        for (const auto i : top) w.entries.push_back({i, history[i].item_id, history[i].label, 0});
        retrieved[slot] = static_cast<std::uint32_t>(heterogeneity_score(w, corpus, &diag));
      }
    }
  });

  HeterogeneityTable table;
  table.population = population;
  table.metric = metric;
  table.items_without_genres = diag.items_without_genres.load();
  for (std::size_t ki = 0; ki < nk; ++ki) {
    HeterogeneityRow row;
    row.k = ks[ki];
    row.n_samples = samples.size();
    std::uint64_t sr = 0;
    std::uint64_t st = 0;
    for (std::size_t si = 0; si < samples.size(); ++si) {
      sr += recent[si * nk + ki];
      st += retrieved[si * nk + ki];
      row.short_windows += is_short[si * nk + ki];
    }
    if (!samples.empty()) {
      row.mean_recent = static_cast<double>(sr) / static_cast<double>(samples.size());
      row.mean_retrieved = static_cast<double>(st) / static_cast<double>(samples.size());
    }
    table.rows.push_back(row);
  }
  return table;
}

std::string to_json(const HeterogeneityTable& table) {
  nlohmann::ordered_json j;
  j["population"] = std::string(to_string(table.population));
  j["metric"] = std::string(to_string(table.metric));
  j["items_without_genres"] = table.items_without_genres;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : table.rows) {
    nlohmann::ordered_json row;
    row["k"] = r.k;
    row["mean_recent"] = r.mean_recent;
    row["mean_retrieved"] = r.mean_retrieved;
    row["n"] = r.n_samples;
    row["short_windows"] = r.short_windows;
    j["rows"].push_back(std::move(row));
  }
  return j.dump(2);
}

std::string to_text_table(const HeterogeneityTable& table) {
  std::string out = fmt::format("{:>4} {:>12} {:>15} {:>10} {:>8}\n", "k", "mean_recent",
                                "mean_retrieved", "n", "short");
  for (const auto& r : table.rows) {
    out += fmt::format("{:>4} {:>12.4f} {:>15.4f} {:>10} {:>8}\n", r.k, r.mean_recent,
                       r.mean_retrieved, r.n_samples, r.short_windows);
  }
  return out;
}

std::string to_csv(const HeterogeneityTable& table) {
  std::string out = "k,mean_recent,mean_retrieved,n\n";
  for (const auto& r : table.rows) {
    out += fmt::format("{},{:.6f},{:.6f},{}\n", r.k, r.mean_recent, r.mean_retrieved,
                       r.n_samples);
  }
  return out;
}

}  // namespace recprompt
