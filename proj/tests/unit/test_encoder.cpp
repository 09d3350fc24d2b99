#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <nlohmann/json.hpp>

#include "fakes.hpp"
#include "recprompt/encoder.hpp"
#include "recprompt/error.hpp"
#include "synthetic.hpp"

using namespace recprompt;
using namespace recprompt::testing;

namespace {

std::string embedding_body(std::size_t n, std::size_t dim, bool reversed = false) {
  nlohmann::json j;
  j["data"] = nlohmann::json::array();
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = reversed ? n - 1 - k : k;
    std::vector<float> v(dim, static_cast<float>(i));
    j["data"].push_back({{"index", i}, {"embedding", v}});
  }
  return j.dump();
}

std::vector<ItemDescription> descriptions(std::size_t n) {
  std::vector<ItemDescription> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({std::to_string(i), "text " + std::to_string(i)});
  return out;
}

RetryPolicy no_sleep() {
  RetryPolicy p;
  p.sleep = [](std::chrono::milliseconds) {};
  return p;
}

}  // namespace

TEST_CASE("movie descriptions") {
  ItemRecord item{"1", "Toy Story (1995)", {}, {"Animation", "Comedy"}};
  CHECK(render_item_description(item, DatasetKind::kMovieLens1M).text ==
        "The movie title is \"Toy Story (1995)\". The genre is Animation, Comedy.");
  item.genres.clear();
  CHECK(render_item_description(item, DatasetKind::kMovieLens25M).text ==
        "The movie title is \"Toy Story (1995)\".");
}

TEST_CASE("book descriptions skip empty fields and year zero") {
  ItemRecord item{"0195153448", "Classical Mythology", {{"author", "Mark P. O. Morford"},
                                                        {"year", "0"},
                                                        {"publisher", " "},
                                                        {"image_url_s", "http://x"}},
                  {}};
  CHECK(render_item_description(item, DatasetKind::kBookCrossing).text ==
        "The book title is \"Classical Mythology\". The author is Mark P. O. Morford.");
}

TEST_CASE("genre indicator vectors are unit 0/1 indicators") {
  const auto ds = make_ml1m({});
  BuiltinBackend backend(ds.catalog, BuiltinMode::kGenreIndicator, {});
  const auto table = acquire_embeddings(render_item_descriptions(ds.catalog, ds.kind), backend);
  CHECK(table.dim == genre_vocabulary(ds.catalog).size());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    double norm = 0;
    std::size_t hot = 0;
    for (const auto x : table.row(r)) {
      norm += x * x;
      hot += x != 0.0F ? 1 : 0;
    }
    CHECK(std::abs(norm - 1.0) < 1e-6);
    CHECK(hot == ds.catalog[r].genres.size());
  }
  ItemRecord bare{"x", "No Genre", {}, {}};
  CHECK_THROWS_AS(builtin_embed(bare, BuiltinMode::kGenreIndicator,
                                {genre_vocabulary(ds.catalog), 0, 0}),
                  Error);
}

TEST_CASE("seeded hash vectors are deterministic and bounded") {
  ItemRecord item{"42", "t", {}, {}};
  BuiltinParams p;
  p.hash_dim = 32;
  p.seed = 3;
  const auto a = builtin_embed(item, BuiltinMode::kSeededHash, p);
  CHECK(a == builtin_embed(item, BuiltinMode::kSeededHash, p));
  for (const auto x : a) CHECK((x >= -1.0F && x <= 1.0F));
  p.seed = 4;
  CHECK(a != builtin_embed(item, BuiltinMode::kSeededHash, p));
}

TEST_CASE("file backend reorders and reports missing ids") {
  VectorTable stored;
  stored.ids = {"b", "a"};
  stored.dim = 2;
  stored.values = {2, 2, 1, 1};
  const auto dir = scratch_dir("encoder-file");
  write_vector_file(dir, stored);
  FileBackend backend(dir);
  std::vector<ItemDescription> want = {{"a", ""}, {"b", ""}};
  const auto table = acquire_embeddings(want, backend);
  CHECK(table.ids == std::vector<std::string>{"a", "b"});
  CHECK(table.values == std::vector<float>{1, 1, 2, 2});
  want.push_back({"c", ""});
  CHECK_THROWS_AS(acquire_embeddings(want, backend), Error);
}

TEST_CASE("vector file round trip is exact") {
  VectorTable t;
  t.ids = {"x", "y", "z"};
  t.dim = 3;
  t.values = {0.1F, -0.0F, 1e-38F, 3.4e38F, -1.5F, 7.0F, 0.2F, 0.3F, 0.4F};
  t.source = "test";
  const auto dir = scratch_dir("encoder-vf");
  write_vector_file(dir, t);
  const auto back = read_vector_file(dir);
  CHECK(back.ids == t.ids);
  CHECK(back.dim == t.dim);
  CHECK(std::memcmp(back.values.data(), t.values.data(), t.values.size() * sizeof(float)) == 0);
  CHECK(back.source == "test");
}

TEST_CASE("service backend batches, reorders by index and sends the model") {
  auto transport = std::make_shared<ScriptedTransport>(std::vector<HttpResponse>{
      {200, embedding_body(16, 4, true), ""}, {200, embedding_body(4, 4), ""}});
  ServiceConfig cfg;
  cfg.endpoint = "http://stub/v1/embeddings";
  cfg.model = "m";
  cfg.max_in_flight = 1;
  cfg.retry = no_sleep();
  ServiceBackend backend(cfg, transport);
  const auto d = descriptions(20);
  const auto table = acquire_embeddings(d, backend);
  CHECK(table.rows() == 20);
  CHECK(table.row(3)[0] == 3.0F);
  CHECK(table.row(17)[0] == 1.0F);
  const auto bodies = transport->bodies();
  REQUIRE(bodies.size() == 2);
  const auto first = nlohmann::json::parse(bodies[0]);
  CHECK(first.at("model") == "m");
  CHECK(first.at("input").size() == 16);
}

TEST_CASE("service backend retries transient failures") {
  auto transport = std::make_shared<ScriptedTransport>(std::vector<HttpResponse>{
      {503, "", ""}, {0, "", "connection refused"}, {200, embedding_body(2, 3), ""}});
  ServiceConfig cfg;
  cfg.endpoint = "http://stub";
  cfg.retry = no_sleep();
  ServiceBackend backend(cfg, transport);
  const auto table = acquire_embeddings(descriptions(2), backend);
  CHECK(table.rows() == 2);
  CHECK(backend.counters().retries == 2);
  CHECK(backend.counters().requests == 3);
}

TEST_CASE("service backend fails fast on auth errors and on exhaustion") {
  ServiceConfig cfg;
  cfg.endpoint = "http://stub";
  cfg.retry = no_sleep();
  {
    auto t = std::make_shared<ScriptedTransport>(std::vector<HttpResponse>{{401, "", ""}});
    ServiceBackend backend(cfg, t);
    CHECK_THROWS_AS(acquire_embeddings(descriptions(1), backend), Error);
    CHECK(t->bodies().size() == 1);
  }
  {
    auto t = std::make_shared<ScriptedTransport>(std::vector<HttpResponse>{});
    ServiceBackend backend(cfg, t);
    try {
      acquire_embeddings(descriptions(1), backend);
      FAIL("expected a service error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kService);
    }
    CHECK(t->bodies().size() == 4);
  }
}

TEST_CASE("service backend rejects inconsistent dimensions") {
  auto t = std::make_shared<ScriptedTransport>(std::vector<HttpResponse>{
      {200, R"({"data":[{"index":0,"embedding":[1,2]},{"index":1,"embedding":[1]}]})", ""}});
  ServiceConfig cfg;
  cfg.endpoint = "http://stub";
  ServiceBackend backend(cfg, t);
  CHECK_THROWS_AS(acquire_embeddings(descriptions(2), backend), Error);
}

TEST_CASE("api key comes from the named variable") {
  ::setenv("RECPROMPT_TEST_KEY", "sekrit", 1);
  const auto headers = json_headers_with_bearer("RECPROMPT_TEST_KEY");
  bool found = false;
  for (const auto& [k, v] : headers) found |= (k == "Authorization" && v == "Bearer sekrit");
  CHECK(found);
  ::unsetenv("RECPROMPT_TEST_KEY");
  try {
    json_headers_with_bearer("RECPROMPT_TEST_KEY");
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfig);
  }
}

TEST_CASE("backoff is exponential and capped") {
  RetryPolicy p;
  CHECK(backoff_delay(p, 0).count() == 200);
  CHECK(backoff_delay(p, 1).count() == 400);
  CHECK(backoff_delay(p, 10).count() == 5000);
}
