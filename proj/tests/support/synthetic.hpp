#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "recprompt/corpus.hpp"

namespace recprompt::testing {

struct SyntheticOptions {
  std::size_t users = 40;
  std::size_t items = 200;
  std::size_t min_events = 8;
  std::size_t max_events = 40;
  std::uint64_t seed = 7;
  // Users rate items from their two favourite genres highly.
  bool genre_taste = true;
  // Share of events landing on the same timestamp as the previous one.
  double tie_rate = 0.1;
};

// The 18 MovieLens-1M genre names.
const std::vector<std::string>& ml_genres();

// Raw-format-faithful synthetic corpora. Every item gets 1-3 genres.
ParsedDataset make_ml1m(const SyntheticOptions& options);
ParsedDataset make_ml25m(const SyntheticOptions& options);
ParsedDataset make_bookcrossing(const SyntheticOptions& options);

// Writes the native raw files into dir and returns their paths.
DatasetPaths write_raw(const ParsedDataset& dataset, const std::filesystem::path& dir);

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(std::string_view name);

}  // namespace recprompt::testing
