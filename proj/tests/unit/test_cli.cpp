#include <doctest.h>

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cli.hpp"
#include "recprompt/builder.hpp"
#include "recprompt/scoring.hpp"
#include "synthetic.hpp"

using namespace recprompt;
using namespace recprompt::testing;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("pipeline stages chain through artifacts") {
  const auto root = scratch_dir("cli-chain");
  SyntheticOptions o;
  o.users = 50;
  write_raw(make_ml1m(o), root / "raw");
  const auto s = root.string();

  auto r = run({"ingest", "--dataset", "ml-1m", "--data-dir", s + "/raw", "--out", s + "/ingest"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(read_json(root / "ingest" / "config.json").at("command") == "ingest");

  r = run({"embed", "--corpus", s + "/ingest/corpus", "--backend", "genre", "--out", s + "/emb"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(std::filesystem::exists(root / "emb" / "vectors" / "vectors.bin"));

  r = run({"pca", "--vectors", s + "/emb/vectors", "--pca-dim", "8", "--out", s + "/pca"});
  REQUIRE_MESSAGE(r.code == 0, r.err);

  r = run({"retrieve", "--corpus", s + "/ingest/corpus", "--vectors", s + "/pca/vectors", "--k",
           "5", "--split", "test", "--out", s + "/ret"});
  REQUIRE_MESSAGE(r.code == 0, r.err);

  for (const char* run_dir : {"/b1", "/b2"}) {
    r = run({"build", "--corpus", s + "/ingest/corpus", "--vectors", s + "/emb/vectors",
             "--n-shot", "32", "--mode", "mixed", "--k", "10", "--seed", "3", "--out",
             s + run_dir});
    REQUIRE_MESSAGE(r.code == 0, r.err);
  }
  const auto m1 = read_json(root / "b1" / "train.manifest.json");
  const auto m2 = read_json(root / "b2" / "train.manifest.json");
  CHECK(m1.at("count") == 64);
  CHECK(m1.at("sha256") == m2.at("sha256"));
  CHECK(read_json(root / "b1" / "test.manifest.json").at("sha256") ==
        read_json(root / "b2" / "test.manifest.json").at("sha256"));
  const auto c1 = read_json(root / "b1" / "config.json");
  CHECK(c1.at("config").at("k") == 10);
  CHECK(c1.at("config").at("mode") == "mixed");

  r = run({"build", "--corpus", s + "/ingest/corpus", "--vectors", s + "/emb/vectors",
           "--n-shot", "32", "--mode", "no-retrieval", "--out", s + "/b3"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(read_json(root / "b3" / "train.manifest.json").at("count") == 32);
  CHECK(read_json(root / "b3" / "config.json").at("config").at("k") == 30);

  r = run({"heterogeneity", "--corpus", s + "/ingest/corpus", "--vectors", s + "/emb/vectors",
           "--ks", "5,10", "--out", s + "/het"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  std::ifstream csv(root / "het" / "heterogeneity.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "k,mean_recent,mean_retrieved,n");

  // Offline evaluation from a logit file.
  const auto test = read_dataset(root / "b1" / "test.jsonl");
  ScoredLogits logits;
  for (const auto& e : test.entries) {
    logits.push_back({e.meta.sample_id, {e.output == "Yes" ? 0.0 : -1.0, -0.5,
                                         LogitSource::kFile, false}});
  }
  write_logit_file(root / "logits.jsonl", logits);
  r = run({"eval", "--input", s + "/b1/test.jsonl", "--logits", s + "/logits.jsonl", "--out",
           s + "/eval"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(read_json(root / "eval" / "metrics.json").at("auc") == 1.0);
}

TEST_CASE("exit codes") {
  const auto root = scratch_dir("cli-codes");
  const auto s = root.string();
  CHECK(run({}).code == 1);
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"ingest", "--dataset", "ml-100k", "--data-dir", s, "--out", s + "/o"}).code == 1);
  CHECK(run({"ingest", "--dataset", "ml-1m", "--data-dir", s + "/missing", "--out", s + "/o"})
            .code == 1);
  CHECK(run({"ingest", "--dataset", "ml-1m", "--data-dir", s, "--out", s + "/o"}).code == 2);
  CHECK(run({"build", "--corpus", s, "--vectors", s, "--mode", "weird", "--out", s}).code == 1);

  write_raw(make_ml1m({}), root / "raw");
  REQUIRE(run({"ingest", "--dataset", "ml-1m", "--data-dir", s + "/raw", "--out", s + "/i"})
              .code == 0);
  REQUIRE(run({"embed", "--corpus", s + "/i/corpus", "--out", s + "/e"}).code == 0);
  CHECK(run({"build", "--corpus", s + "/i/corpus", "--vectors", s + "/e/vectors", "--n-shot",
             "100000000", "--out", s + "/b"})
            .code == 1);
  CHECK(run({"build", "--corpus", s + "/i/corpus", "--vectors", s + "/e/vectors", "--k", "0",
             "--out", s + "/b"})
            .code == 1);

  const auto dataset = s + "/t/test.jsonl";
  REQUIRE(run({"build", "--corpus", s + "/i/corpus", "--vectors", s + "/e/vectors",
               "--test-limit", "3", "--out", s + "/t"})
              .code == 0);
  CHECK(run({"score", "--input", dataset, "--endpoint", "http://127.0.0.1:1/v1/completions",
             "--max-retries", "0", "--out", s + "/sc"})
            .code == 3);
}
