#include "recprompt/scoring.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <optional>
#include <unordered_set>

#include "recprompt/error.hpp"

namespace recprompt {
namespace {

constexpr double kMissingTokenPenalty = 10.0;

bool is_yes(std::string_view t) { return t == "Yes" || t == " Yes"; }
bool is_no(std::string_view t) { return t == "No" || t == " No"; }

struct TokenScan {
  std::optional<double> yes;
  std::optional<double> no;
  std::optional<double> min;

  void add(std::string_view token, double logprob) {
    if (!std::isfinite(logprob)) return;
    min = min ? std::min(*min, logprob) : logprob;
    if (is_yes(token)) yes = yes ? std::max(*yes, logprob) : logprob;
    if (is_no(token)) no = no ? std::max(*no, logprob) : logprob;
  }
};

}  // namespace

std::string_view to_string(LogitSource source) {
  return source == LogitSource::kService ? "service" : "file";
}

double pointwise_score(double s_yes, double s_no) {
  if (!std::isfinite(s_yes) || !std::isfinite(s_no)) {
    throw_data_error(fmt::format("non-finite logits ({}, {})", s_yes, s_no));
  }
  const double d = s_yes - s_no;
  double y = 0.0;
  if (d >= 0.0) {
    y = 1.0 / (1.0 + std::exp(-d));
  } else {
    const double e = std::exp(d);
    y = e / (1.0 + e);
  }
  constexpr double kLow = std::numeric_limits<double>::denorm_min();
  constexpr double kHigh = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  return std::clamp(y, kLow, kHigh);
}

double pointwise_score(const LogitPair& logits) {
  return pointwise_score(logits.s_yes, logits.s_no);
}

LogitPair parse_answer_logprobs(std::string_view response_body) {
  TokenScan scan;
  try {
    const auto j = nlohmann::json::parse(response_body);
    const auto& logprobs = j.at("choices").at(0).at("logprobs");
    if (logprobs.contains("top_logprobs") && !logprobs.at("top_logprobs").is_null()) {
      for (const auto& [token, value] : logprobs.at("top_logprobs").at(0).items()) {
        scan.add(token, value.get<double>());
      }
    } else if (logprobs.contains("content")) {
      for (const auto& alt : logprobs.at("content").at(0).at("top_logprobs")) {
        scan.add(alt.at("token").get<std::string>(), alt.at("logprob").get<double>());
      }
    } else {
      throw_service_error("completions response carries no top log-probabilities");
    }
  } catch (const nlohmann::json::exception& e) {
    throw_service_error(fmt::format("malformed completions response: {}", e.what()));
  }
  if (!scan.min) throw_service_error("completions response has an empty top log-probability list");

  LogitPair out;
  out.source = LogitSource::kService;
  const double floor = *scan.min - kMissingTokenPenalty;
  out.s_yes = scan.yes.value_or(floor);
  out.s_no = scan.no.value_or(floor);
  out.degraded = !scan.yes || !scan.no;
  return out;
}

ScoringClient::ScoringClient(ScoringConfig config, std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      headers_(json_headers_with_bearer(config_.api_key_env)) {
  if (config_.endpoint.empty()) throw_config_error("scoring endpoint is empty");
  if (config_.top_logprobs < 2) throw_config_error("top_logprobs must be at least 2");
  if (!transport_) transport_ = make_http_transport();
}

LogitPair ScoringClient::fetch(const RenderedPair& pair) {
  nlohmann::json request;
  request["model"] = config_.model;
  request["prompt"] = pair.input;
  request["max_tokens"] = 1;
  request["logprobs"] = config_.top_logprobs;
  const auto response = post_with_retries(*transport_, config_.endpoint, request.dump(),
                                          headers_, config_.timeout, config_.retry,
                                          &counters_);
  try {
    return parse_answer_logprobs(response.body);
  } catch (const Error& e) {
    throw Error(e.kind(), fmt::format("sample {}: {}", pair.meta.sample_id, e.what()));
  }
}

ScoredLogits ScoringClient::fetch_all(std::span<const RenderedPair> pairs) {
  ScoredLogits out(pairs.size());
  parallel_for(pairs.size(), config_.max_in_flight, [&](std::size_t i) {
    out[i] = {pairs[i].meta.sample_id, fetch(pairs[i])};
  });
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

void write_logit_file(const std::filesystem::path& path, const ScoredLogits& logits) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_data_error(fmt::format("cannot write {}", path.string()));
  for (const auto& [id, lp] : logits) {
    nlohmann::ordered_json j;
    j["id"] = id;
    j["s_yes"] = lp.s_yes;
    j["s_no"] = lp.s_no;
    j["degraded"] = lp.degraded;
    out << j.dump() << '\n';
  }
  if (!out) throw_data_error(fmt::format("write to {} failed", path.string()));
}

ScoredLogits load_logit_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data_error(fmt::format("cannot open {}", path.string()));
  ScoredLogits out;
  std::unordered_set<std::int64_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    LogitPair lp;
    std::int64_t id = 0;
    try {
      const auto j = nlohmann::json::parse(line);
      id = j.at("id").get<std::int64_t>();
      lp.s_yes = j.at("s_yes").get<double>();
      lp.s_no = j.at("s_no").get<double>();
      lp.degraded = j.value("degraded", false);
    } catch (const nlohmann::json::exception& e) {
      throw_data_error(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
    if (!std::isfinite(lp.s_yes) || !std::isfinite(lp.s_no)) {
      throw_data_error(fmt::format("{}:{}: non-finite logits", path.string(), line_no));
    }
    if (!seen.insert(id).second) {
      throw_data_error(fmt::format("{}:{}: duplicate id {}", path.string(), line_no, id));
    }
    lp.source = LogitSource::kFile;
    out.emplace_back(id, lp);
  }
  return out;
}

}  // namespace recprompt
