#include "recprompt/http.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "recprompt/error.hpp"

namespace recprompt {
namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw_config_error(fmt::format("endpoint '{}' lacks a scheme", url));
  }
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw_config_error(fmt::format("endpoint '{}' has unsupported scheme", url));
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport final : public HttpTransport {
 public:
  HttpResponse post_json(const std::string& url, const std::string& body,
                         const Headers& headers,
                         std::chrono::milliseconds timeout) override {
    const auto parts = split_url(url);
    httplib::Client client(parts.origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers h;
    std::string content_type = "application/json";
    for (const auto& [k, v] : headers) {
      if (k == "Content-Type") {
        content_type = v;
      } else {
        h.emplace(k, v);
      }
    }
    auto res = client.Post(parts.path, h, body, content_type);
    HttpResponse out;
    if (!res) {
      out.error = httplib::to_string(res.error());
      return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
  }
};

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport() {
  return std::make_unique<HttplibTransport>();
}

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt) {
  auto delay = policy.base_delay;
  for (int i = 0; i < attempt && delay < policy.max_delay; ++i) delay *= 2;
  return std::min(delay, policy.max_delay);
}

bool is_transient(const HttpResponse& response) {
  return response.status == 0 || response.status == 408 || response.status == 429 ||
         response.status >= 500;
}

HttpResponse post_with_retries(HttpTransport& transport, const std::string& url,
                               const std::string& body, const Headers& headers,
                               std::chrono::milliseconds timeout, const RetryPolicy& policy,
                               RequestCounters* counters) {
  for (int attempt = 0;; ++attempt) {
    if (counters != nullptr) ++counters->requests;
    auto response = transport.post_json(url, body, headers, timeout);
    if (response.status >= 200 && response.status < 300) return response;
    if (response.status == 401 || response.status == 403) {
      throw_service_error(
          fmt::format("{}: authentication failed (HTTP {})", url, response.status));
    }
    if (!is_transient(response)) {
      throw_service_error(fmt::format("{}: HTTP {}: {}", url, response.status,
                                      response.body.substr(0, 200)));
    }
    if (attempt >= policy.max_retries) {
      throw_service_error(fmt::format(
          "{}: giving up after {} attempts: {}", url, attempt + 1,
          response.status == 0 ? response.error : fmt::format("HTTP {}", response.status)));
    }
    if (counters != nullptr) ++counters->retries;
    const auto delay = backoff_delay(policy, attempt);
    if (policy.sleep) {
      policy.sleep(delay);
    } else {
      std::this_thread::sleep_for(delay);
    }
  }
}

Headers json_headers_with_bearer(std::string_view api_key_env) {
  Headers headers{{"Content-Type", "application/json"}};
  if (api_key_env.empty()) return headers;
  const char* key = std::getenv(std::string(api_key_env).c_str());
  if (key == nullptr || *key == '\0') {
    throw_config_error(fmt::format("environment variable {} is not set", api_key_env));
  }
  headers.emplace_back("Authorization", fmt::format("Bearer {}", key));
  return headers;
}

void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&] {
        while (!failed) {
          const auto i = next++;
          if (i >= count) return;
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            failed = true;
          }
        }
      });
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace recprompt
