#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "recprompt/corpus.hpp"
#include "recprompt/prompting.hpp"
#include "recprompt/retrieval.hpp"

namespace recprompt {

// kMixed: original + retrieved per drawn sample (2N entries).
// kNoMixture: retrieved only (N). kNoRetrieval: original only (N).
// kHalfShot: kMixed over the nested N/2 draw (2 * floor(N/2)).
enum class BuildMode { kMixed, kNoMixture, kNoRetrieval, kHalfShot };

std::string_view to_string(BuildMode mode);
BuildMode parse_build_mode(std::string_view name);

struct MixedDataset {
  std::vector<RenderedPair> entries;
  std::size_t n_shot = 0;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  BuildMode mode = BuildMode::kMixed;
  std::string template_version;
};

struct TestSet {
  std::vector<RenderedPair> entries;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::optional<std::size_t> limit;
  std::string template_version;
};

// Entries are ordered by ascending sample id, original before retrieved.
// Errors are rethrown with the offending sample id.
MixedDataset build_mixed(const FewShotDraw& draw, const Corpus& corpus,
                         const VectorStore& vectors, const RetrievalConfig& config,
                         const PromptTemplate& tmpl, BuildMode mode = BuildMode::kMixed);

// Every test-split sample as a retrieved variant, optionally downsampled to
// `limit` with a seeded, reproducible draw. Ordered by sample id.
TestSet build_test(const Corpus& corpus, const VectorStore& vectors,
                   const RetrievalConfig& config, const PromptTemplate& tmpl,
                   std::optional<std::size_t> limit = std::nullopt, std::uint64_t seed = 0);

struct DatasetManifest {
  std::string kind;  // "train" or "test"
  std::string mode;  // build mode for train sets, "retrieved" for test sets
  std::size_t count = 0;
  std::optional<std::size_t> n_shot;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::string template_version;
  std::string sha256;  // of the JSON-lines file bytes

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct DatasetFile {
  DatasetManifest manifest;
  std::vector<RenderedPair> entries;
};

// <stem>.jsonl plus <stem>.manifest.json next to it.
std::filesystem::path manifest_path_for(const std::filesystem::path& dataset_path);

// Writes one record per line:
//   {"id", "variant", "input", "output",
//    "meta": {"user_id", "target_item_id", "k", "history_item_ids"}}
DatasetManifest write_dataset(const MixedDataset& dataset, const std::filesystem::path& path);
DatasetManifest write_dataset(const TestSet& dataset, const std::filesystem::path& path);

// Reads a dataset back and checks its digest against the manifest.
DatasetFile read_dataset(const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);

}  // namespace recprompt
