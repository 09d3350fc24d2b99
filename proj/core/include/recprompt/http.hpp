#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace recprompt {

using Headers = std::vector<std::pair<std::string, std::string>>;

struct HttpResponse {
  int status = 0;  // 0 means the request never got an HTTP response
  std::string body;
  std::string error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post_json(const std::string& url, const std::string& body,
                                 const Headers& headers,
                                 std::chrono::milliseconds timeout) = 0;
};

// cpp-httplib backed transport; http:// and https:// URLs.
std::unique_ptr<HttpTransport> make_http_transport();

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{200};
  std::chrono::milliseconds max_delay{5000};
  // Replaced in tests to avoid real sleeping.
  std::function<void(std::chrono::milliseconds)> sleep;
};

// min(max_delay, base_delay * 2^attempt) for attempt = 0, 1, ...
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt);

bool is_transient(const HttpResponse& response);

struct RequestCounters {
  std::atomic<std::size_t> requests{0};
  std::atomic<std::size_t> retries{0};
};

// Retries transport failures, 408, 429 and 5xx with capped exponential
// backoff. 401/403 fail immediately with a service error, as does any
// other non-2xx status or exhausting the retries.
HttpResponse post_with_retries(HttpTransport& transport, const std::string& url,
                               const std::string& body, const Headers& headers,
                               std::chrono::milliseconds timeout, const RetryPolicy& policy,
                               RequestCounters* counters = nullptr);

// JSON + optional bearer-token headers. An empty env name means no auth; a
// named but unset variable is a config error.
Headers json_headers_with_bearer(std::string_view api_key_env);

// Runs fn(i) for i in [0, count) on up to `workers` threads. The first
// exception is rethrown after all workers stop.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace recprompt
