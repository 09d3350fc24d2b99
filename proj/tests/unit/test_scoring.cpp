#include <doctest.h>

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>

#include "fakes.hpp"
#include "oracles.hpp"
#include "recprompt/error.hpp"
#include "recprompt/scoring.hpp"
#include "synthetic.hpp"

using namespace recprompt;
using namespace recprompt::testing;

namespace {

RenderedPair pair_with_id(std::int64_t id) {
  RenderedPair p;
  p.input = "prompt " + std::to_string(id);
  p.meta.sample_id = id;
  return p;
}

ScoringConfig stub_config() {
  ScoringConfig c;
  c.endpoint = "http://stub/v1/completions";
  c.model = "m";
  c.retry.sleep = [](std::chrono::milliseconds) {};
  return c;
}

}  // namespace

TEST_CASE("pointwise score examples") {
  CHECK(pointwise_score(0.3, 0.3) == 0.5);
  CHECK(std::abs(pointwise_score(2.0, 0.0) - 0.8807970779778823) < 1e-12);
  const double big = pointwise_score(1000.0, 0.0);
  CHECK(big < 1.0);
  CHECK(big > 1.0 - 1e-12);
  const double tiny = pointwise_score(0.0, 1000.0);
  CHECK(tiny > 0.0);
  CHECK(tiny < 1e-12);
  CHECK_THROWS_AS(pointwise_score(NAN, 0.0), Error);
  CHECK_THROWS_AS(pointwise_score(0.0, INFINITY), Error);
}

TEST_CASE("pointwise score against a 50-digit oracle") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-40.0, 40.0);
  for (int i = 0; i < 2000; ++i) {
    const double a = u(rng);
    const double b = u(rng);
    CHECK(std::abs(pointwise_score(a, b) - logistic_oracle(a, b)) < 1e-12);
  }
}

TEST_CASE("monotone in the logit difference") {
  double prev = 0.0;
  for (double d = -30.0; d <= 30.0; d += 0.25) {
    const double y = pointwise_score(d, 0.0);
    CHECK(y > prev);
    prev = y;
  }
}

TEST_CASE("completions parsing") {
  SUBCASE("both tokens present") {
    const auto lp = parse_answer_logprobs(completion_body({{"Yes", -0.3}, {"No", -1.4}}));
    CHECK(lp.s_yes == -0.3);
    CHECK(lp.s_no == -1.4);
    CHECK_FALSE(lp.degraded);
    CHECK(lp.source == LogitSource::kService);
  }
  SUBCASE("missing token gets the floor") {
    const auto lp =
        parse_answer_logprobs(completion_body({{"Yes", -0.3}, {"Maybe", -8.1}, {"So", -2.0}}));
    CHECK(lp.s_yes == -0.3);
    CHECK(std::abs(lp.s_no - -18.1) < 1e-12);
    CHECK(lp.degraded);
  }
  SUBCASE("leading-space aliases, case-sensitive match") {
    const auto lp = parse_answer_logprobs(
        completion_body({{" Yes", -0.5}, {"yes", -0.1}, {" No", -1.0}}));
    CHECK(lp.s_yes == -0.5);
    CHECK(lp.s_no == -1.0);
    CHECK_FALSE(lp.degraded);
  }
  SUBCASE("chat-style content list") {
    const std::string body =
        R"({"choices":[{"logprobs":{"content":[{"token":"Yes","logprob":-0.2,)"
        R"("top_logprobs":[{"token":"Yes","logprob":-0.2},{"token":"No","logprob":-1.7}]}]}}]})";
    const auto lp = parse_answer_logprobs(body);
    CHECK(lp.s_yes == -0.2);
    CHECK(lp.s_no == -1.7);
  }
  SUBCASE("malformed") {
    CHECK_THROWS_AS(parse_answer_logprobs("{}"), Error);
    CHECK_THROWS_AS(parse_answer_logprobs("not json"), Error);
    CHECK_THROWS_AS(parse_answer_logprobs(completion_body({})), Error);
  }
}

TEST_CASE("client sends a one-token completions request and retries 5xx") {
  auto t = std::make_shared<ScriptedTransport>(std::vector<HttpResponse>{
      {502, "", ""}, {200, completion_body({{"Yes", -0.3}, {"No", -1.4}}), ""}});
  auto cfg = stub_config();
  cfg.top_logprobs = 5;
  ScoringClient client(cfg, t);
  const auto lp = client.fetch(pair_with_id(3));
  CHECK(lp.s_yes == -0.3);
  CHECK(client.counters().retries == 1);
  const auto req = nlohmann::json::parse(t->bodies().front());
  CHECK(req.at("model") == "m");
  CHECK(req.at("prompt") == "prompt 3");
  CHECK(req.at("max_tokens") == 1);
  CHECK(req.at("logprobs") == 5);
}

TEST_CASE("fetch_all returns results sorted by id") {
  auto t = std::make_shared<CallbackTransport>([](const std::string& body) {
    const auto j = nlohmann::json::parse(body);
    const auto prompt = j.at("prompt").get<std::string>();
    const double id = std::stod(prompt.substr(7));
    return HttpResponse{200, completion_body({{"Yes", -id}, {"No", -1.0}}), ""};
  });
  auto cfg = stub_config();
  cfg.max_in_flight = 4;
  ScoringClient client(cfg, t);
  std::vector<RenderedPair> pairs;
  for (const int id : {9, 3, 7, 1, 5}) pairs.push_back(pair_with_id(id));
  const auto out = client.fetch_all(pairs);
  REQUIRE(out.size() == 5);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i].first == static_cast<std::int64_t>(2 * i + 1));
    CHECK(out[i].second.s_yes == -static_cast<double>(2 * i + 1));
  }
}

TEST_CASE("logit files") {
  const auto dir = scratch_dir("scoring-io");
  const ScoredLogits logits = {{4, {-0.1, -2.0, LogitSource::kFile, false}},
                               {1, {-3.0, -0.25, LogitSource::kFile, true}},
                               {2, {0.1234567890123, 1e-300, LogitSource::kFile, false}}};
  write_logit_file(dir / "l.jsonl", logits);
  CHECK(load_logit_file(dir / "l.jsonl") == logits);

  std::ofstream(dir / "dup.jsonl") << R"({"id":1,"s_yes":0,"s_no":0,"degraded":false})" << "\n"
                                   << R"({"id":1,"s_yes":1,"s_no":0,"degraded":false})" << "\n";
  try {
    load_logit_file(dir / "dup.jsonl");
    FAIL("expected a duplicate error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("duplicate id 1") != std::string::npos);
  }
  std::ofstream(dir / "bad.jsonl") << R"({"id":1,"s_yes":"x","s_no":0})" << "\n";
  CHECK_THROWS_AS(load_logit_file(dir / "bad.jsonl"), Error);
}
