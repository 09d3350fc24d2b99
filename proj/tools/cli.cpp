#include "cli.hpp"

#include <fmt/format.h>

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <thread>

#include "recprompt/builder.hpp"
#include "recprompt/corpus.hpp"
#include "recprompt/encoder.hpp"
#include "recprompt/error.hpp"
#include "recprompt/evaluation.hpp"
#include "recprompt/http.hpp"
#include "recprompt/prompting.hpp"
#include "recprompt/reducer.hpp"
#include "recprompt/retrieval.hpp"
#include "recprompt/scoring.hpp"

namespace recprompt::cli {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

constexpr int kVersion = 1;

struct Options {
  std::string dataset;
  std::string data_dir;
  std::string corpus;
  std::string vectors;
  std::string vectors_in;
  std::string input;
  std::string logits;
  std::string out;
  std::optional<std::size_t> k;
  std::size_t n_shot = 0;
  std::uint64_t seed = 42;
  std::uint64_t split_seed = 42;
  std::string metric = "cosine";
  std::size_t pca_dim = 512;
  std::string solver = "auto";
  std::string backend = "genre";
  std::string endpoint;
  std::string model;
  std::string api_key_env;
  std::size_t batch_size = 16;
  std::size_t max_in_flight = 4;
  int top_logprobs = 20;
  int max_retries = 3;
  std::size_t hash_dim = 64;
  std::string mode = "mixed";
  std::optional<std::size_t> test_limit;
  std::string template_dir;
  std::string template_version = "v1";
  std::string split = "all";
  std::vector<std::size_t> ks{5, 10, 15, 20, 25, 30};
  std::string population = "all";
};

// Default window: 60 for BookCrossing, 30 for both MovieLens sets.
std::size_t default_k(DatasetKind kind) { return kind == DatasetKind::kBookCrossing ? 60 : 30; }

void require(bool ok, const std::string& message) {
  if (!ok) throw_config_error(message);
}

void require_dir(const std::string& path, std::string_view flag) {
  require(!path.empty(), fmt::format("{} is required", flag));
  require(fs::is_directory(path), fmt::format("{} {} is not a directory", flag, path));
}

void require_file(const std::string& path, std::string_view flag) {
  require(!path.empty(), fmt::format("{} is required", flag));
  require(fs::is_regular_file(path), fmt::format("{} {} is not a file", flag, path));
}

fs::path out_dir(const Options& o) {
  require(!o.out.empty(), "--out is required");
  fs::create_directories(o.out);
  return o.out;
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_data_error(fmt::format("cannot write {}", path.string()));
  out << body;
}

void write_config(const fs::path& dir, std::string_view command, ordered_json resolved) {
  ordered_json j;
  j["command"] = std::string(command);
  j["format"] = kVersion;
  j["config"] = std::move(resolved);
  write_text(dir / "config.json", j.dump(2) + "\n");
}

Corpus load_corpus(const Options& o) {
  require_dir(o.corpus, "--corpus");
  return read_corpus_cache(o.corpus);
}

VectorStore load_vectors(const Options& o) {
  require_dir(o.vectors, "--vectors");
  return VectorStore(read_vector_file(o.vectors));
}

RetrievalConfig retrieval_config(const Options& o, DatasetKind kind) {
  RetrievalConfig cfg;
  cfg.k = o.k.value_or(default_k(kind));
  cfg.metric = parse_metric(o.metric);
  cfg.validate();
  return cfg;
}

PromptTemplate load_template(const Options& o, DatasetKind kind) {
  if (o.template_dir.empty()) {
    require(o.template_version == "v1",
            fmt::format("no builtin template {}; pass --template-dir", o.template_version));
    return PromptTemplate::builtin(kind);
  }
  return PromptTemplate::load_from_directory(o.template_dir, kind, o.template_version);
}

RetryPolicy retry_policy(const Options& o) {
  require(o.max_retries >= 0, "--max-retries must be non-negative");
  RetryPolicy p;
  p.max_retries = o.max_retries;
  return p;
}

int cmd_ingest(const Options& o, std::ostream& out) {
  require(!o.dataset.empty(), "--dataset is required");
  const auto kind = parse_dataset_kind(o.dataset);
  require_dir(o.data_dir, "--data-dir");
  const auto dir = out_dir(o);

  auto parsed = parse_dataset(kind, DatasetPaths::in_directory(kind, o.data_dir));
  ordered_json report;
  for (const auto& f : parsed.report.files) {
    ordered_json jf;
    jf["path"] = fs::path(f.path).filename().string();
    jf["lines"] = f.lines;
    jf["records"] = f.records;
    jf["malformed"] = f.malformed;
    jf["malformed_line_numbers"] = f.malformed_line_numbers;
    report["files"].push_back(std::move(jf));
  }
  report["unknown_item_interactions"] = parsed.report.unknown_item_interactions;

  SampleOptions so;
  so.split_seed = o.split_seed;
  const auto corpus = Corpus::from_parsed(std::move(parsed), so);
  write_corpus_cache(corpus, dir / "corpus");
  const auto n_train = corpus.samples_in(Split::kTrain).size();
  report["items"] = corpus.catalog().size();
  report["users"] = corpus.sequences().size();
  report["samples"] = corpus.samples().size();
  report["train"] = n_train;
  report["test"] = corpus.samples().size() - n_train;
  write_text(dir / "report.json", report.dump(2) + "\n");

  ordered_json cfg;
  cfg["dataset"] = o.dataset;
  cfg["data_dir"] = o.data_dir;
  cfg["split_seed"] = o.split_seed;
  write_config(dir, "ingest", cfg);
  out << fmt::format("{} samples ({} train, {} test) from {} users\n", corpus.samples().size(),
                     n_train, corpus.samples().size() - n_train, corpus.sequences().size());
  return 0;
}

int cmd_embed(const Options& o, std::ostream& out) {
  const auto corpus = load_corpus(o);
  const auto dir = out_dir(o);
  const auto descriptions = render_item_descriptions(corpus.catalog(), corpus.kind());

  std::unique_ptr<EmbeddingBackend> backend;
  if (o.backend == "genre" || o.backend == "hash") {
    BuiltinParams params;
    params.hash_dim = o.hash_dim;
    params.seed = o.seed;
    backend = std::make_unique<BuiltinBackend>(
        corpus.catalog(), o.backend == "genre" ? BuiltinMode::kGenreIndicator
                                               : BuiltinMode::kSeededHash,
        params);
  } else if (o.backend == "file") {
    require_dir(o.vectors_in, "--vectors-in");
    backend = std::make_unique<FileBackend>(o.vectors_in);
  } else if (o.backend == "service") {
    require(!o.endpoint.empty(), "--endpoint is required for the service backend");
    ServiceConfig sc;
    sc.endpoint = o.endpoint;
    sc.model = o.model;
    sc.api_key_env = o.api_key_env;
    sc.batch_size = o.batch_size;
    sc.max_in_flight = o.max_in_flight;
    sc.retry = retry_policy(o);
    backend = std::make_unique<ServiceBackend>(sc, nullptr);
  } else {
    throw_config_error(fmt::format("unknown backend '{}'", o.backend));
  }

  const auto table = acquire_embeddings(descriptions, *backend);
  write_vector_file(dir / "vectors", table);
  {
    std::string body;
    for (const auto& d : descriptions) {
      ordered_json j;
      j["item_id"] = d.item_id;
      j["text"] = d.text;
      body += j.dump() + "\n";
    }
    write_text(dir / "descriptions.jsonl", body);
  }

  ordered_json cfg;
  cfg["corpus"] = o.corpus;
  cfg["backend"] = o.backend;
  cfg["backend_id"] = backend->id();
  cfg["description_template"] = std::string(kDescriptionTemplateVersion);
  if (o.backend == "hash") {
    cfg["hash_dim"] = o.hash_dim;
    cfg["seed"] = o.seed;
  }
  if (o.backend == "file") cfg["vectors_in"] = o.vectors_in;
  if (o.backend == "service") {
    cfg["endpoint"] = o.endpoint;
    cfg["model"] = o.model;
    cfg["api_key_env"] = o.api_key_env;
    cfg["batch_size"] = o.batch_size;
  }
  write_config(dir, "embed", cfg);
  out << fmt::format("{} vectors of dim {} from {}\n", table.rows(), table.dim, backend->id());
  return 0;
}

int cmd_pca(const Options& o, std::ostream& out) {
  require_dir(o.vectors, "--vectors");
  const auto dir = out_dir(o);
  PcaSolver solver = PcaSolver::kAuto;
  if (o.solver == "covariance") {
    solver = PcaSolver::kCovariance;
  } else if (o.solver == "svd") {
    solver = PcaSolver::kSvd;
  } else {
    require(o.solver == "auto", fmt::format("unknown solver '{}'", o.solver));
  }
  const auto raw = read_vector_file(o.vectors);
  const auto model = fit_pca(raw, o.pca_dim, solver);
  save_pca_model(model, dir / "model");
  write_vector_file(dir / "vectors", project_all(model, raw));

  double kept = 0.0;
  for (const auto v : model.explained_variance) kept += v;
  ordered_json cfg;
  cfg["vectors"] = o.vectors;
  cfg["pca_dim"] = o.pca_dim;
  cfg["solver"] = o.solver;
  write_config(dir, "pca", cfg);
  out << fmt::format("{} -> {} dims, {:.4f} of variance kept\n", model.input_dim,
                     model.output_dim, model.total_variance > 0 ? kept / model.total_variance : 1.0);
  return 0;
}

int cmd_retrieve(const Options& o, std::ostream& out) {
  const auto corpus = load_corpus(o);
  const auto vectors = load_vectors(o);
  const auto cfg = retrieval_config(o, corpus.kind());
  const auto dir = out_dir(o);
  std::vector<Sample> samples;
  if (o.split == "all") {
    samples.assign(corpus.samples().begin(), corpus.samples().end());
  } else if (o.split == "train" || o.split == "test") {
    samples = corpus.samples_in(o.split == "train" ? Split::kTrain : Split::kTest);
  } else {
    throw_config_error(fmt::format("unknown split '{}'", o.split));
  }

  RetrievalDiagnostics diag;
  std::vector<std::pair<std::int64_t, RetrievedHistory>> results(samples.size());
  parallel_for(samples.size(), std::max(1u, std::thread::hardware_concurrency()),
               [&](std::size_t i) {
                 results[i] = {samples[i].sample_id,
                               subr_top_k(corpus, samples[i], vectors, cfg, &diag)};
               });
  write_retrieval_sidecar(dir / "retrieval.jsonl", results);

  ordered_json c;
  c["corpus"] = o.corpus;
  c["vectors"] = o.vectors;
  c["k"] = cfg.k;
  c["metric"] = std::string(to_string(cfg.metric));
  c["split"] = o.split;
  write_config(dir, "retrieve", c);
  out << fmt::format("{} windows written, {} zero-vector cosines\n", results.size(),
                     diag.zero_vector_cosines.load());
  return 0;
}

int cmd_build(const Options& o, std::ostream& out) {
  const auto corpus = load_corpus(o);
  const auto vectors = load_vectors(o);
  const auto cfg = retrieval_config(o, corpus.kind());
  const auto mode = parse_build_mode(o.mode);
  const auto tmpl = load_template(o, corpus.kind());
  const auto dir = out_dir(o);

  ordered_json c;
  c["corpus"] = o.corpus;
  c["vectors"] = o.vectors;
  c["dataset"] = std::string(to_string(corpus.kind()));
  c["k"] = cfg.k;
  c["metric"] = std::string(to_string(cfg.metric));
  c["n_shot"] = o.n_shot;
  c["seed"] = o.seed;
  c["mode"] = o.mode;
  c["test_limit"] = o.test_limit ? ordered_json(*o.test_limit) : ordered_json(nullptr);
  c["template_version"] = tmpl.version();

  if (o.n_shot > 0) {
    const auto train = corpus.samples_in(Split::kTrain);
    const auto draw = sample_few_shot(train, o.n_shot, o.seed);
    const auto mixed = build_mixed(draw, corpus, vectors, cfg, tmpl, mode);
    const auto m = write_dataset(mixed, dir / "train.jsonl");
    c["train_sha256"] = m.sha256;
    out << fmt::format("train: {} entries ({}), sha256 {}\n", m.count, o.mode, m.sha256);
  }
  const auto test = build_test(corpus, vectors, cfg, tmpl, o.test_limit, o.seed);
  const auto m = write_dataset(test, dir / "test.jsonl");
  c["test_sha256"] = m.sha256;
  write_config(dir, "build", c);
  out << fmt::format("test: {} entries, sha256 {}\n", m.count, m.sha256);
  return 0;
}

int cmd_score(const Options& o, std::ostream& out) {
  require_file(o.input, "--input");
  require(!o.endpoint.empty(), "--endpoint is required");
  const auto dir = out_dir(o);
  const auto dataset = read_dataset(o.input);
  ScoringConfig sc;
  sc.endpoint = o.endpoint;
  sc.model = o.model;
  sc.api_key_env = o.api_key_env;
  sc.top_logprobs = o.top_logprobs;
  sc.max_in_flight = o.max_in_flight;
  sc.retry = retry_policy(o);
  ScoringClient client(sc, nullptr);
  const auto logits = client.fetch_all(dataset.entries);
  write_logit_file(dir / "logits.jsonl", logits);

  const auto degraded = std::count_if(logits.begin(), logits.end(),
                                      [](const auto& p) { return p.second.degraded; });
  ordered_json c;
  c["input"] = o.input;
  c["input_sha256"] = dataset.manifest.sha256;
  c["endpoint"] = o.endpoint;
  c["model"] = o.model;
  c["api_key_env"] = o.api_key_env;
  c["top_logprobs"] = o.top_logprobs;
  write_config(dir, "score", c);
  out << fmt::format("{} scored, {} degraded, {} retries\n", logits.size(), degraded,
                     client.counters().retries.load());
  return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
  require_file(o.input, "--input");
  require_file(o.logits, "--logits");
  const auto dir = out_dir(o);
  const auto dataset = read_dataset(o.input);
  const auto logits = load_logit_file(o.logits);
  const auto report = evaluate_logits(logits, dataset.entries);
  write_text(dir / "metrics.json", to_json(report) + "\n");
  write_text(dir / "metrics.txt", to_text_table(report));

  ordered_json c;
  c["input"] = o.input;
  c["input_sha256"] = dataset.manifest.sha256;
  c["logits"] = o.logits;
  write_config(dir, "eval", c);
  out << to_text_table(report);
  return 0;
}

int cmd_heterogeneity(const Options& o, std::ostream& out) {
  const auto corpus = load_corpus(o);
  const auto vectors = load_vectors(o);
  const auto metric = parse_metric(o.metric);
  const auto population = parse_population(o.population);
  require(!o.ks.empty(), "--ks needs at least one value");
  const auto dir = out_dir(o);
  const auto table = heterogeneity_table(corpus, vectors, o.ks, metric, population);
  write_text(dir / "heterogeneity.json", to_json(table) + "\n");
  write_text(dir / "heterogeneity.txt", to_text_table(table));
  write_text(dir / "heterogeneity.csv", to_csv(table));

  ordered_json c;
  c["corpus"] = o.corpus;
  c["vectors"] = o.vectors;
  c["ks"] = o.ks;
  c["metric"] = o.metric;
  c["population"] = o.population;
  write_config(dir, "heterogeneity", c);
  out << to_text_table(table);
  return 0;
}

void add_service_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--endpoint", o.endpoint, "Service URL");
  cmd->add_option("--model", o.model, "Model name sent with each request");
  cmd->add_option("--api-key-env", o.api_key_env, "Environment variable holding the API key");
  cmd->add_option("--max-in-flight", o.max_in_flight, "Concurrent requests")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--max-retries", o.max_retries, "Retries for transient failures");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Retrieval-enhanced CTR prompting pipeline", "recprompt"};
  app.require_subcommand(1);

  auto* ingest = app.add_subcommand("ingest", "Parse a raw dataset into a corpus cache");
  ingest->add_option("--dataset", o.dataset, "bookcrossing, ml-1m or ml-25m")->required();
  ingest->add_option("--data-dir", o.data_dir, "Extracted dataset directory")->required();
  ingest->add_option("--split-seed", o.split_seed, "Seed of the BookCrossing user split");

  auto* embed = app.add_subcommand("embed", "Embed item descriptions");
  embed->add_option("--corpus", o.corpus, "Corpus cache directory")->required();
  embed->add_option("--backend", o.backend, "service, file, genre or hash")
      ->check(CLI::IsMember({"service", "file", "genre", "hash"}));
  embed->add_option("--vectors-in", o.vectors_in, "Vector file for the file backend");
  embed->add_option("--hash-dim", o.hash_dim, "Dimension of hash embeddings");
  embed->add_option("--seed", o.seed, "Seed of hash embeddings");
  embed->add_option("--batch-size", o.batch_size, "Texts per request")
      ->check(CLI::PositiveNumber);
  add_service_flags(embed, o);

  auto* pca = app.add_subcommand("pca", "Fit PCA and project embeddings");
  pca->add_option("--vectors", o.vectors, "Raw vector file directory")->required();
  pca->add_option("--pca-dim", o.pca_dim, "Output dimension")->check(CLI::PositiveNumber);
  pca->add_option("--solver", o.solver, "auto, covariance or svd");

  auto* retrieve = app.add_subcommand("retrieve", "Compute top-K relevant histories");
  retrieve->add_option("--corpus", o.corpus, "Corpus cache directory")->required();
  retrieve->add_option("--vectors", o.vectors, "Item vector directory")->required();
  retrieve->add_option("--k", o.k, "Window length");
  retrieve->add_option("--metric", o.metric, "cosine, l2 or l1");
  retrieve->add_option("--split", o.split, "all, train or test");

  auto* build = app.add_subcommand("build", "Render train and test prompt datasets");
  build->add_option("--corpus", o.corpus, "Corpus cache directory")->required();
  build->add_option("--vectors", o.vectors, "Item vector directory")->required();
  build->add_option("--k", o.k, "Window length");
  build->add_option("--metric", o.metric, "cosine, l2 or l1");
  build->add_option("--n-shot", o.n_shot, "Training samples to draw (0: test only)");
  build->add_option("--seed", o.seed, "Draw seed");
  build->add_option("--mode", o.mode, "mixed, no-mixture, no-retrieval or half-shot")
      ->check(CLI::IsMember({"mixed", "no-mixture", "no-retrieval", "half-shot"}));
  build->add_option("--test-limit", o.test_limit, "Downsample the test set");
  build->add_option("--template-dir", o.template_dir, "Directory of .tmpl files");
  build->add_option("--template-version", o.template_version, "Template version");

  auto* score = app.add_subcommand("score", "Fetch Yes/No logits for a dataset");
  score->add_option("--input", o.input, "Dataset JSON-lines file")->required();
  score->add_option("--top-logprobs", o.top_logprobs, "Alternatives requested per token");
  add_service_flags(score, o);

  auto* eval = app.add_subcommand("eval", "Compute AUC, log loss and accuracy");
  eval->add_option("--input", o.input, "Test dataset JSON-lines file")->required();
  eval->add_option("--logits", o.logits, "Logit JSON-lines file")->required();

  auto* hetero = app.add_subcommand("heterogeneity", "Genre heterogeneity per window length");
  hetero->add_option("--corpus", o.corpus, "Corpus cache directory")->required();
  hetero->add_option("--vectors", o.vectors, "Item vector directory")->required();
  hetero->add_option("--ks", o.ks, "Window lengths")->delimiter(',');
  hetero->add_option("--metric", o.metric, "cosine, l2 or l1");
  hetero->add_option("--population", o.population, "all, train or test");

  for (auto* cmd : app.get_subcommands({})) {
    cmd->add_option("--out", o.out, "Output directory")->required();
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::kConfig);
  }

  try {
    const auto* cmd = app.get_subcommands().front();
    const auto name = cmd->get_name();
    if (name == "ingest") return cmd_ingest(o, out);
    if (name == "embed") return cmd_embed(o, out);
    if (name == "pca") return cmd_pca(o, out);
    if (name == "retrieve") return cmd_retrieve(o, out);
    if (name == "build") return cmd_build(o, out);
    if (name == "score") return cmd_score(o, out);
    if (name == "eval") return cmd_eval(o, out);
    if (name == "heterogeneity") return cmd_heterogeneity(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::kData);
  }
  return static_cast<int>(ErrorKind::kConfig);
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace recprompt::cli
