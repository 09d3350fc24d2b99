#include "recprompt/builder.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "recprompt/error.hpp"
#include "recprompt/http.hpp"
#include "recprompt/text.hpp"

namespace recprompt {
namespace {

using ordered_json = nlohmann::ordered_json;

std::size_t worker_count() {
  return std::max(1u, std::thread::hardware_concurrency());
}

template <typename Fn>
auto with_sample_context(std::int64_t sample_id, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), fmt::format("sample {}: {}", sample_id, e.what()));
  }
}

std::string serialize_entries(const std::vector<RenderedPair>& entries) {
  std::string out;
  for (const auto& pair : entries) {
    ordered_json j;
    j["id"] = pair.meta.sample_id;
    j["variant"] = std::string(to_string(pair.meta.variant));
    j["input"] = pair.input;
    j["output"] = pair.output;
    j["meta"]["user_id"] = pair.meta.user_id;
    j["meta"]["target_item_id"] = pair.meta.target_item_id;
    j["meta"]["k"] = pair.meta.k;
    j["meta"]["history_item_ids"] = pair.meta.history_item_ids;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

DatasetManifest write_entries(const std::vector<RenderedPair>& entries, DatasetManifest manifest,
                              const std::filesystem::path& path) {
  const auto body = serialize_entries(entries);
  manifest.count = entries.size();
  manifest.sha256 = sha256_hex(body);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw_data_error(fmt::format("cannot write {}", path.string()));
    out << body;
    if (!out) throw_data_error(fmt::format("write to {} failed", path.string()));
  }
  ordered_json m;
  m["count"] = manifest.count;
  m["n_shot"] = manifest.n_shot ? ordered_json(*manifest.n_shot) : ordered_json(nullptr);
  m["k"] = manifest.k;
  m["seed"] = manifest.seed;
  m["template_version"] = manifest.template_version;
  m["sha256"] = manifest.sha256;
  m["kind"] = manifest.kind;
  m["mode"] = manifest.mode;
  m["file"] = path.filename().string();
  const auto mpath = manifest_path_for(path);
  std::ofstream out(mpath, std::ios::trunc);
  if (!out) throw_data_error(fmt::format("cannot write {}", mpath.string()));
  out << m.dump(2) << '\n';
  return manifest;
}

}  // namespace

std::string_view to_string(BuildMode mode) {
  switch (mode) {
    case BuildMode::kMixed:
      return "mixed";
    case BuildMode::kNoMixture:
      return "no-mixture";
    case BuildMode::kNoRetrieval:
      return "no-retrieval";
    case BuildMode::kHalfShot:
      return "half-shot";
  }
  return "unknown";
}

BuildMode parse_build_mode(std::string_view name) {
  if (name == "mixed") return BuildMode::kMixed;
  if (name == "no-mixture") return BuildMode::kNoMixture;
  if (name == "no-retrieval") return BuildMode::kNoRetrieval;
  if (name == "half-shot") return BuildMode::kHalfShot;
  throw_config_error(fmt::format("unknown build mode '{}'", name));
}

MixedDataset build_mixed(const FewShotDraw& draw, const Corpus& corpus,
                         const VectorStore& vectors, const RetrievalConfig& config,
                         const PromptTemplate& tmpl, BuildMode mode) {
  config.validate();
  std::vector<std::int64_t> ids = draw.selected_ids;
  if (mode == BuildMode::kHalfShot) ids.resize(draw.selected_ids.size() / 2);
  std::sort(ids.begin(), ids.end());

  const bool with_original = mode != BuildMode::kNoMixture;
  const bool with_retrieved = mode != BuildMode::kNoRetrieval;
  const std::size_t per_sample = (with_original ? 1 : 0) + (with_retrieved ? 1 : 0);

  MixedDataset out;
  out.n_shot = draw.n_shot;
  out.k = config.k;
  out.seed = draw.seed;
  out.mode = mode;
  out.template_version = tmpl.version();
  out.entries.resize(ids.size() * per_sample);

  parallel_for(ids.size(), worker_count(), [&](std::size_t i) {
    with_sample_context(ids[i], [&] {
      const auto& sample = corpus.sample(ids[i]);
      if (sample.split != Split::kTrain) {
        throw_config_error("drawn sample is not in the training split");
      }
      std::size_t slot = i * per_sample;
      if (with_original) {
        out.entries[slot++] = render_sample(corpus, sample, top_recent(corpus, sample, config.k),
                                            tmpl, Variant::kOriginal, config.k);
      }
      if (with_retrieved) {
        out.entries[slot] = render_sample(corpus, sample,
                                          subr_top_k(corpus, sample, vectors, config), tmpl,
                                          Variant::kRetrieved, config.k);
      }
      return 0;
    });
  });
  return out;
}

TestSet build_test(const Corpus& corpus, const VectorStore& vectors,
                   const RetrievalConfig& config, const PromptTemplate& tmpl,
                   std::optional<std::size_t> limit, std::uint64_t seed) {
  config.validate();
  auto test = corpus.samples_in(Split::kTest);
  if (limit && *limit < test.size()) {
    std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
    keyed.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
      keyed.emplace_back(
          text::mix64(text::mix64(seed ^ 0x7465737453657421ULL) ^
                      static_cast<std::uint64_t>(test[i].sample_id)),
          i);
    }
    std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(*limit),
                      keyed.end());
    std::vector<Sample> kept;
    kept.reserve(*limit);
    for (std::size_t i = 0; i < *limit; ++i) kept.push_back(test[keyed[i].second]);
    test = std::move(kept);
  }
  std::sort(test.begin(), test.end(),
            [](const Sample& a, const Sample& b) { return a.sample_id < b.sample_id; });

  TestSet out;
  out.k = config.k;
  out.seed = seed;
  out.limit = limit;
  out.template_version = tmpl.version();
  out.entries.resize(test.size());
  parallel_for(test.size(), worker_count(), [&](std::size_t i) {
    with_sample_context(test[i].sample_id, [&] {
      out.entries[i] = render_sample(corpus, test[i], subr_top_k(corpus, test[i], vectors, config),
                                     tmpl, Variant::kRetrieved, config.k);
      return 0;
    });
  });
  return out;
}

std::filesystem::path manifest_path_for(const std::filesystem::path& dataset_path) {
  auto p = dataset_path;
  p.replace_extension(".manifest.json");
  return p;
}

DatasetManifest write_dataset(const MixedDataset& dataset, const std::filesystem::path& path) {
  DatasetManifest m;
  m.kind = "train";
  m.mode = std::string(to_string(dataset.mode));
  m.n_shot = dataset.n_shot;
  m.k = dataset.k;
  m.seed = dataset.seed;
  m.template_version = dataset.template_version;
  return write_entries(dataset.entries, std::move(m), path);
}

DatasetManifest write_dataset(const TestSet& dataset, const std::filesystem::path& path) {
  DatasetManifest m;
  m.kind = "test";
  m.mode = "retrieved";
  m.k = dataset.k;
  m.seed = dataset.seed;
  m.template_version = dataset.template_version;
  return write_entries(dataset.entries, std::move(m), path);
}

DatasetFile read_dataset(const std::filesystem::path& path) {
  DatasetFile file;
  const auto mpath = manifest_path_for(path);
  try {
    std::ifstream min(mpath);
    if (!min) throw_data_error(fmt::format("cannot open {}", mpath.string()));
    const auto m = nlohmann::json::parse(min);
    auto& man = file.manifest;
    man.kind = m.at("kind").get<std::string>();
    man.mode = m.at("mode").get<std::string>();
    man.count = m.at("count").get<std::size_t>();
    if (!m.at("n_shot").is_null()) man.n_shot = m.at("n_shot").get<std::size_t>();
    man.k = m.at("k").get<std::size_t>();
    man.seed = m.at("seed").get<std::uint64_t>();
    man.template_version = m.at("template_version").get<std::string>();
    man.sha256 = m.at("sha256").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw_data_error(fmt::format("{}: {}", mpath.string(), e.what()));
  }

  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data_error(fmt::format("cannot open {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  const auto body = buf.str();
  if (sha256_hex(body) != file.manifest.sha256) {
    throw_data_error(fmt::format("{}: content digest does not match its manifest", path.string()));
  }

  std::istringstream lines(body);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      RenderedPair pair;
      pair.input = j.at("input").get<std::string>();
      pair.output = j.at("output").get<std::string>();
      pair.meta.sample_id = j.at("id").get<std::int64_t>();
      pair.meta.variant = parse_variant(j.at("variant").get<std::string>());
      const auto& meta = j.at("meta");
      pair.meta.user_id = meta.at("user_id").get<std::string>();
      pair.meta.target_item_id = meta.at("target_item_id").get<std::string>();
      pair.meta.k = meta.at("k").get<std::size_t>();
      pair.meta.history_item_ids = meta.at("history_item_ids").get<std::vector<std::string>>();
      pair.meta.template_version = file.manifest.template_version;
      file.entries.push_back(std::move(pair));
    } catch (const nlohmann::json::exception& e) {
      throw_data_error(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
  if (file.entries.size() != file.manifest.count) {
    throw_data_error(fmt::format("{}: manifest count {} but {} entries", path.string(),
                                 file.manifest.count, file.entries.size()));
  }
  return file;
}

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw_data_error("SHA-256 computation failed");
  }
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

}  // namespace recprompt
