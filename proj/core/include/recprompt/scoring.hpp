#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "recprompt/http.hpp"
#include "recprompt/prompting.hpp"

namespace recprompt {

enum class LogitSource { kService, kFile };

std::string_view to_string(LogitSource source);

struct LogitPair {
  double s_yes = 0.0;
  double s_no = 0.0;
  LogitSource source = LogitSource::kFile;
  bool degraded = false;

  friend bool operator==(const LogitPair&, const LogitPair&) = default;
};

// exp(s_yes) / (exp(s_yes) + exp(s_no)) in the shifted, overflow-free form.
// The result is kept inside the open interval (0, 1). Non-finite logits are
// a data error.
double pointwise_score(double s_yes, double s_no);
double pointwise_score(const LogitPair& logits);

// Yes/No log-probabilities from a completions response body. Accepts
// choices[0].logprobs.top_logprobs[0] as a {token: logprob} map, or
// choices[0].logprobs.content[0].top_logprobs as [{token, logprob}].
// "Yes" / "No" match case-sensitively; " Yes" / " No" are aliases. A
// missing answer token gets (min returned logprob - 10) and degraded=true.
LogitPair parse_answer_logprobs(std::string_view response_body);

struct ScoringConfig {
  std::string endpoint;  // full URL of the completions route
  std::string model;
  std::string api_key_env;
  int top_logprobs = 20;
  std::size_t max_in_flight = 4;
  std::chrono::milliseconds timeout{60000};
  RetryPolicy retry;
};

using ScoredLogits = std::vector<std::pair<std::int64_t, LogitPair>>;

class ScoringClient {
 public:
  ScoringClient(ScoringConfig config, std::shared_ptr<HttpTransport> transport);

  LogitPair fetch(const RenderedPair& pair);
  // Results are sorted by sample id whatever the completion order.
  ScoredLogits fetch_all(std::span<const RenderedPair> pairs);

  const RequestCounters& counters() const noexcept { return counters_; }

 private:
  ScoringConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  Headers headers_;
  RequestCounters counters_;
};

// JSON lines: {"id", "s_yes", "s_no", "degraded"}.
void write_logit_file(const std::filesystem::path& path, const ScoredLogits& logits);
// Order-preserving; rejects duplicate ids and non-finite values.
ScoredLogits load_logit_file(const std::filesystem::path& path);

}  // namespace recprompt
