#include <doctest.h>

#include <cmath>
#include <random>

#include "recprompt/error.hpp"
#include "recprompt/retrieval.hpp"
#include "synthetic.hpp"

using namespace recprompt;
using namespace recprompt::testing;

namespace {

VectorStore store(std::vector<std::pair<std::string, std::vector<float>>> rows) {
  VectorTable t;
  t.dim = rows.front().second.size();
  for (auto& [id, v] : rows) {
    t.ids.push_back(id);
    t.values.insert(t.values.end(), v.begin(), v.end());
  }
  return VectorStore(std::move(t));
}

std::vector<Interaction> history(std::initializer_list<std::pair<const char*, bool>> items) {
  std::vector<Interaction> h;
  std::int64_t ts = 0;
  for (const auto& [id, label] : items) h.push_back({"u", id, label ? 5.0 : 1.0, ++ts, label});
  return h;
}

}  // namespace

TEST_CASE("relevance metrics") {
  const std::vector<float> a = {1, 0};
  const std::vector<float> b = {0, 2};
  const std::vector<float> c = {3, 4};
  CHECK(relevance(a, a, Metric::kCosine) == doctest::Approx(1.0));
  CHECK(relevance(a, b, Metric::kCosine) == doctest::Approx(0.0));
  CHECK(relevance(a, c, Metric::kL2) == doctest::Approx(-std::sqrt(4.0 + 16.0)));
  CHECK(relevance(a, c, Metric::kL1) == doctest::Approx(-6.0));
}

TEST_CASE("cosine with a zero vector is zero and counted") {
  RetrievalDiagnostics diag;
  const std::vector<float> z = {0, 0};
  const std::vector<float> a = {1, 1};
  CHECK(relevance(z, a, Metric::kCosine, &diag) == 0.0);
  CHECK(relevance(a, z, Metric::kCosine, &diag) == 0.0);
  CHECK(diag.zero_vector_cosines == 2);
}

TEST_CASE("select_top_k breaks ties toward the larger index") {
  const std::vector<double> s = {0.5, 0.9, 0.5, 0.1, 0.5};
  CHECK(select_top_k(s, 2) == std::vector<std::size_t>{1, 4});
  CHECK(select_top_k(s, 3) == std::vector<std::size_t>{1, 2, 4});
  CHECK(select_top_k(s, 10) == std::vector<std::size_t>{0, 1, 2, 3, 4});
}

TEST_CASE("subr_top_k keeps chronological order and both labels") {
  const auto vs = store({{"t", {1, 0}},
                         {"h0", {1, 0.1F}},
                         {"h1", {0, 1}},
                         {"h2", {1, 0.2F}},
                         {"h3", {-1, 0}},
                         {"h4", {1, 0}}});
  const auto h = history({{"h0", false}, {"h1", true}, {"h2", true}, {"h3", true}, {"h4", false}});
  RetrievalConfig cfg;
  cfg.k = 3;
  const auto w = subr_top_k(h, "t", vs, cfg);
  CHECK(w.indices() == std::vector<std::size_t>{0, 2, 4});
  CHECK(w.entries[0].label == false);
  CHECK(w.entries[1].label == true);
  CHECK(w == brute_force_oracle(h, "t", vs, cfg));

  cfg.k = 10;
  CHECK(subr_top_k(h, "t", vs, cfg).entries.size() == h.size());
  CHECK(top_recent(h, 2).indices() == std::vector<std::size_t>{3, 4});
  CHECK(top_recent(h, 9).indices().size() == 5);
}

TEST_CASE("missing vectors and bad config") {
  const auto vs = store({{"t", {1}}});
  const auto h = history({{"x", true}});
  CHECK_THROWS_AS(subr_top_k(h, "t", vs, {}), Error);
  RetrievalConfig zero;
  zero.k = 0;
  CHECK_THROWS_AS(zero.validate(), Error);
  CHECK_THROWS_AS(parse_metric("dot"), Error);
}

TEST_CASE("random instances match the brute-force oracle, ties included") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t len = 1 + rng() % 64;
    const std::size_t dim = 1 + rng() % 32;
    // Few distinct vectors so ties are common.
    const std::size_t distinct = 1 + rng() % 6;
    std::uniform_int_distribution<int> q(-2, 2);
    std::vector<std::vector<float>> pool(distinct, std::vector<float>(dim));
    for (auto& v : pool) {
      for (auto& x : v) x = static_cast<float>(q(rng));
    }
    VectorTable t;
    t.dim = dim;
    std::vector<Interaction> h;
    for (std::size_t i = 0; i <= len; ++i) {
      const auto id = "i" + std::to_string(i);
      t.ids.push_back(id);
      const auto& v = pool[rng() % distinct];
      t.values.insert(t.values.end(), v.begin(), v.end());
      if (i < len) h.push_back({"u", id, 1.0, std::int64_t(i), (rng() & 1) != 0});
    }
    const VectorStore vs(std::move(t));
    for (const auto metric : {Metric::kCosine, Metric::kL2, Metric::kL1}) {
      RetrievalConfig cfg;
      cfg.metric = metric;
      cfg.k = 1 + rng() % 70;
      CHECK(subr_top_k(h, "i" + std::to_string(len), vs, cfg) ==
            brute_force_oracle(h, "i" + std::to_string(len), vs, cfg));
    }
  }
}

TEST_CASE("corpus overloads and sidecar round trip") {
  const auto corpus = Corpus::from_parsed(make_ml1m({}));
  VectorTable t;
  t.dim = 4;
  for (const auto& item : corpus.catalog()) {
    t.ids.push_back(item.item_id);
    const auto h = std::hash<std::string>{}(item.item_id);
    for (int j = 0; j < 4; ++j) t.values.push_back(static_cast<float>((h >> (j * 8)) & 0xFF));
  }
  const VectorStore vs(std::move(t));
  RetrievalConfig cfg;
  cfg.k = 7;
  std::vector<std::pair<std::int64_t, RetrievedHistory>> results;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& s = corpus.samples()[i];
    results.emplace_back(s.sample_id, subr_top_k(corpus, s, vs, cfg));
    CHECK(results.back().second.entries.size() == std::min<std::size_t>(7, s.history_length()));
  }
  const auto dir = scratch_dir("retrieval-sidecar");
  write_retrieval_sidecar(dir / "r.jsonl", results);
  const auto back = read_retrieval_sidecar(dir / "r.jsonl");
  REQUIRE(back.size() == results.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].first == results[i].first);
    REQUIRE(back[i].second.size() == results[i].second.entries.size());
    for (std::size_t j = 0; j < back[i].second.size(); ++j) {
      CHECK(back[i].second[j].first == results[i].second.entries[j].history_index);
      CHECK(back[i].second[j].second == results[i].second.entries[j].relevance);
    }
  }
}
