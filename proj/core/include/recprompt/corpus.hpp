#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace recprompt {

enum class DatasetKind {
  kBookCrossing,
  kMovieLens1M,
  kMovieLens25M,
};

std::string_view to_string(DatasetKind kind);
// Accepts the CLI spellings: bookcrossing, ml-1m, ml-25m.
DatasetKind parse_dataset_kind(std::string_view name);
bool has_timestamps(DatasetKind kind);

// Minimum number of prior events a sample needs to be kept.
inline constexpr std::size_t kMinHistory = 5;

struct Interaction {
  std::string user_id;
  std::string item_id;
  double rating = 0.0;
  std::optional<std::int64_t> timestamp;
  bool label = false;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

struct ItemRecord {
  std::string item_id;
  std::string title;
  // Non-genre attributes in source field order (author, year, ...).
  std::vector<std::pair<std::string, std::string>> attributes;
  // Genre tokens in source order, unique after normalize_genre().
  std::vector<std::string> genres;

  const std::string* attribute(std::string_view name) const;

  friend bool operator==(const ItemRecord&, const ItemRecord&) = default;
};

using UserProfile = std::map<std::string, std::string>;

struct UserRecord {
  std::string user_id;
  UserProfile profile;

  friend bool operator==(const UserRecord&, const UserRecord&) = default;
};

// Trimmed and case-folded genre token used for comparisons.
std::string normalize_genre(std::string_view genre);

// Raw file locations for one dataset. `users` is unused for MovieLens-25M.
struct DatasetPaths {
  std::filesystem::path ratings;
  std::filesystem::path items;
  std::filesystem::path users;

  // Standard file names inside an extracted dataset directory.
  static DatasetPaths in_directory(DatasetKind kind,
                                   const std::filesystem::path& dir);
};

struct FileReport {
  std::string path;
  std::size_t lines = 0;
  std::size_t records = 0;
  std::size_t malformed = 0;
  std::vector<std::size_t> malformed_line_numbers;  // first few, 1-based
};

struct ParseReport {
  std::vector<FileReport> files;
  // Ratings whose item is absent from the item catalog. They are dropped
  // before sequences are built and counted here.
  std::size_t unknown_item_interactions = 0;

  std::size_t total_malformed() const;
};

struct ParsedDataset {
  DatasetKind kind = DatasetKind::kMovieLens1M;
  std::vector<ItemRecord> catalog;
  std::vector<Interaction> interactions;
  std::vector<UserRecord> users;
  ParseReport report;
};

// Malformed lines are counted in the report. A file where more than 1% of
// lines are malformed is rejected with a data error.
ParsedDataset parse_dataset(DatasetKind kind, const DatasetPaths& paths);

// Dataset-native positive-label rule. Throws a data error when the rating
// is outside the dataset's scale.
bool binarize_label(double rating, DatasetKind kind);

struct UserSequence {
  std::string user_id;
  std::vector<Interaction> events;
};

// Groups interactions per user in first-appearance order. Events are sorted
// by timestamp with ties kept in input order; BookCrossing keeps file order.
std::vector<UserSequence> build_sequences(std::span<const Interaction> interactions,
                                          DatasetKind kind);

enum class Split { kTrain, kTest };
std::string_view to_string(Split split);

// A CTR instance. The history is the prefix events[0, target_position) of the
// owning user's sequence; Corpus resolves it.
struct Sample {
  std::int64_t sample_id = 0;
  std::size_t user_index = 0;
  std::size_t target_position = 0;
  bool label = false;
  Split split = Split::kTrain;
  std::optional<std::int64_t> timestamp;

  std::size_t history_length() const noexcept { return target_position; }

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct SampleOptions {
  // Seed for the BookCrossing user-level 9:1 split.
  std::uint64_t split_seed = 42;
};

// One sample per event with at least kMinHistory prior events. MovieLens:
// the latest 1/9 of samples by global timestamp are test. BookCrossing: a
// seeded 1/10 of users (those with samples) contribute test samples.
std::vector<Sample> build_samples(std::span<const UserSequence> sequences,
                                  DatasetKind kind,
                                  const SampleOptions& options = {});

struct FewShotDraw {
  std::size_t n_shot = 0;
  std::uint64_t seed = 0;
  // Priority order: every smaller draw with the same seed is a prefix.
  std::vector<std::int64_t> selected_ids;
};

// Uniform draw without replacement. Each sample gets a seeded priority key
// and the n smallest keys win, so draws with one seed are nested.
FewShotDraw sample_few_shot(std::span<const Sample> train, std::size_t n_shot,
                            std::uint64_t seed);

// Owns one dataset after preprocessing and resolves sample references.
class Corpus {
 public:
  Corpus() = default;
  Corpus(DatasetKind kind, std::vector<ItemRecord> catalog,
         std::vector<UserRecord> users, std::vector<UserSequence> sequences,
         std::vector<Sample> samples);

  // Parse + sequence + sample in one step.
  static Corpus from_parsed(ParsedDataset parsed, const SampleOptions& options = {});

  DatasetKind kind() const noexcept { return kind_; }
  std::span<const ItemRecord> catalog() const noexcept { return catalog_; }
  std::span<const UserRecord> users() const noexcept { return users_; }
  std::span<const UserSequence> sequences() const noexcept { return sequences_; }
  std::span<const Sample> samples() const noexcept { return samples_; }

  const ItemRecord* find_item(std::string_view item_id) const;
  const ItemRecord& item(std::string_view item_id) const;
  const Sample& sample(std::int64_t sample_id) const;

  const UserSequence& sequence(const Sample& s) const;
  std::span<const Interaction> history(const Sample& s) const;
  const Interaction& target_event(const Sample& s) const;
  const ItemRecord& target(const Sample& s) const;
  const UserProfile& profile(const Sample& s) const;

  std::vector<Sample> samples_in(Split split) const;

 private:
  DatasetKind kind_ = DatasetKind::kMovieLens1M;
  std::vector<ItemRecord> catalog_;
  std::vector<UserRecord> users_;
  std::vector<UserSequence> sequences_;
  std::vector<Sample> samples_;
  std::unordered_map<std::string, std::size_t> item_index_;
  std::unordered_map<std::string, std::size_t> user_index_;
  std::unordered_map<std::int64_t, std::size_t> sample_index_;
  UserProfile empty_profile_;
};

// Parsed-corpus cache: one JSON-lines file per entity type.
//   items.jsonl, users.jsonl, interactions.jsonl, samples.jsonl
void write_corpus_cache(const Corpus& corpus, const std::filesystem::path& dir);
Corpus read_corpus_cache(const std::filesystem::path& dir);

// Writes the dataset back in its native raw format (encoding included).
// Used to check that parsing is lossless.
void write_native_dataset(const ParsedDataset& dataset, const DatasetPaths& paths);

}  // namespace recprompt
