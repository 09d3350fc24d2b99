#include "recprompt/corpus.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <unordered_set>

#include "recprompt/error.hpp"
#include "recprompt/text.hpp"

namespace recprompt {
namespace {

constexpr std::size_t kMaxReportedLines = 10;

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  s = text::trim(s);
  T value{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
  return value;
}

// Tracks line accounting for one file and enforces the 1% malformed limit.
class LineReader {
 public:
  LineReader(const std::filesystem::path& path, FileReport& report)
      : in_(path, std::ios::binary), report_(report) {
    if (!in_) throw_data_error(fmt::format("cannot open {}", path.string()));
    report_.path = path.string();
  }

  void skip_header() {
    std::string header;
    std::getline(in_, header);
  }

  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++line_number_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      ++report_.lines;
      return true;
    }
    return false;
  }

  void malformed() {
    ++report_.malformed;
    if (report_.malformed_line_numbers.size() < kMaxReportedLines) {
      report_.malformed_line_numbers.push_back(line_number_ + header_offset_);
    }
  }

  void accepted() { ++report_.records; }

  void finish() const {
    if (report_.malformed * 100 > report_.lines) {
      throw_data_error(fmt::format(
          "{}: {} of {} lines malformed (more than 1%); wrong file format?",
          report_.path, report_.malformed, report_.lines));
    }
  }

  void set_header_offset(std::size_t n) { header_offset_ = n; }

 private:
  std::ifstream in_;
  FileReport& report_;
  std::size_t line_number_ = 0;
  std::size_t header_offset_ = 0;
};

bool rating_in_range(double rating, DatasetKind kind) {
  if (!std::isfinite(rating)) return false;
  switch (kind) {
    case DatasetKind::kBookCrossing:
      return rating >= 0.0 && rating <= 10.0;
    case DatasetKind::kMovieLens1M:
    case DatasetKind::kMovieLens25M:
      return rating >= 0.0 && rating <= 5.0;
  }
  return false;
}

std::vector<std::string> split_genres(std::string_view field) {
  std::vector<std::string> genres;
  std::unordered_set<std::string> seen;
  for (const auto token : text::split(field, "|")) {
    const auto trimmed = text::trim(token);
    if (trimmed.empty()) continue;
    if (seen.insert(normalize_genre(trimmed)).second) {
      genres.emplace_back(trimmed);
    }
  }
  return genres;
}

void parse_ml1m(const DatasetPaths& paths, ParsedDataset& out) {
  std::string line;
  {
    FileReport report;
    LineReader reader(paths.items, report);
    while (reader.next(line)) {
      const auto parts = text::split(line, "::");
      if (parts.size() != 3 || parts[0].empty()) {
        reader.malformed();
        continue;
      }
      ItemRecord item;
      item.item_id = std::string(parts[0]);
      item.title = text::latin1_to_utf8(parts[1]);
      item.genres = split_genres(text::latin1_to_utf8(parts[2]));
      out.catalog.push_back(std::move(item));
      reader.accepted();
    }
    reader.finish();
    out.report.files.push_back(std::move(report));
  }
  if (!paths.users.empty()) {
    FileReport report;
    LineReader reader(paths.users, report);
    while (reader.next(line)) {
      const auto parts = text::split(line, "::");
      if (parts.size() != 5 || parts[0].empty()) {
        reader.malformed();
        continue;
      }
      UserRecord user;
      user.user_id = std::string(parts[0]);
      user.profile["gender"] = std::string(parts[1]);
      user.profile["age"] = std::string(parts[2]);
      user.profile["occupation"] = std::string(parts[3]);
      user.profile["zipcode"] = text::latin1_to_utf8(parts[4]);
      out.users.push_back(std::move(user));
      reader.accepted();
    }
    reader.finish();
    out.report.files.push_back(std::move(report));
  }
  {
    FileReport report;
    LineReader reader(paths.ratings, report);
    while (reader.next(line)) {
      const auto parts = text::split(line, "::");
      if (parts.size() != 4 || parts[0].empty() || parts[1].empty()) {
        reader.malformed();
        continue;
      }
      const auto rating = parse_number<int>(parts[2]);
      const auto ts = parse_number<std::int64_t>(parts[3]);
      if (!rating || !ts || !rating_in_range(*rating, DatasetKind::kMovieLens1M)) {
        reader.malformed();
        continue;
      }
      Interaction event;
      event.user_id = std::string(parts[0]);
      event.item_id = std::string(parts[1]);
      event.rating = *rating;
      event.timestamp = *ts;
      event.label = binarize_label(event.rating, DatasetKind::kMovieLens1M);
      out.interactions.push_back(std::move(event));
      reader.accepted();
    }
    reader.finish();
    out.report.files.push_back(std::move(report));
  }
}

void parse_ml25m(const DatasetPaths& paths, ParsedDataset& out) {
  std::string line;
  std::vector<std::string> fields;
  {
    FileReport report;
    LineReader reader(paths.items, report);
    reader.skip_header();
    reader.set_header_offset(1);
    while (reader.next(line)) {
      if (!text::split_quoted(line, ',', fields) || fields.size() != 3 ||
          fields[0].empty()) {
        reader.malformed();
        continue;
      }
      ItemRecord item;
      item.item_id = fields[0];
      item.title = fields[1];
      if (fields[2] != "(no genres listed)") item.genres = split_genres(fields[2]);
      out.catalog.push_back(std::move(item));
      reader.accepted();
    }
    reader.finish();
    out.report.files.push_back(std::move(report));
  }
  {
    FileReport report;
    LineReader reader(paths.ratings, report);
    reader.skip_header();
    reader.set_header_offset(1);
    while (reader.next(line)) {
      const auto parts = text::split(line, ",");
      if (parts.size() != 4 || parts[0].empty() || parts[1].empty()) {
        reader.malformed();
        continue;
      }
      const auto rating = parse_number<double>(parts[2]);
      const auto ts = parse_number<std::int64_t>(parts[3]);
      if (!rating || !ts || !rating_in_range(*rating, DatasetKind::kMovieLens25M)) {
        reader.malformed();
        continue;
      }
      Interaction event;
      event.user_id = std::string(parts[0]);
      event.item_id = std::string(parts[1]);
      event.rating = *rating;
      event.timestamp = *ts;
      event.label = binarize_label(event.rating, DatasetKind::kMovieLens25M);
      out.interactions.push_back(std::move(event));
      reader.accepted();
    }
    reader.finish();
    out.report.files.push_back(std::move(report));
  }
}

void parse_bookcrossing(const DatasetPaths& paths, ParsedDataset& out) {
  std::string line;
  std::vector<std::string> fields;
  {
    FileReport report;
    LineReader reader(paths.items, report);
    reader.skip_header();
    reader.set_header_offset(1);
    while (reader.next(line)) {
      if (!text::split_quoted(line, ';', fields) || fields.size() != 8 ||
          fields[0].empty()) {
        reader.malformed();
        continue;
      }
      ItemRecord item;
      item.item_id = text::latin1_to_utf8(fields[0]);
      item.title = text::latin1_to_utf8(fields[1]);
      item.attributes = {
          {"author", text::latin1_to_utf8(fields[2])},
          {"year", text::latin1_to_utf8(fields[3])},
          {"publisher", text::latin1_to_utf8(fields[4])},
          {"image_url_s", text::latin1_to_utf8(fields[5])},
          {"image_url_m", text::latin1_to_utf8(fields[6])},
          {"image_url_l", text::latin1_to_utf8(fields[7])},
      };
      out.catalog.push_back(std::move(item));
      reader.accepted();
    }
    reader.finish();
    out.report.files.push_back(std::move(report));
  }
  if (!paths.users.empty()) {
    FileReport report;
    LineReader reader(paths.users, report);
    reader.skip_header();
    reader.set_header_offset(1);
    while (reader.next(line)) {
      if (!text::split_quoted(line, ';', fields) || fields.size() != 3 ||
          fields[0].empty()) {
        reader.malformed();
        continue;
      }
      UserRecord user;
      user.user_id = text::latin1_to_utf8(fields[0]);
      user.profile["location"] = text::latin1_to_utf8(fields[1]);
      if (fields[2] != "NULL") user.profile["age"] = text::latin1_to_utf8(fields[2]);
      out.users.push_back(std::move(user));
      reader.accepted();
    }
    reader.finish();
    out.report.files.push_back(std::move(report));
  }
  {
    FileReport report;
    LineReader reader(paths.ratings, report);
    reader.skip_header();
    reader.set_header_offset(1);
    while (reader.next(line)) {
      if (!text::split_quoted(line, ';', fields) || fields.size() != 3 ||
          fields[0].empty() || fields[1].empty()) {
        reader.malformed();
        continue;
      }
      const auto rating = parse_number<int>(fields[2]);
      if (!rating || !rating_in_range(*rating, DatasetKind::kBookCrossing)) {
        reader.malformed();
        continue;
      }
      Interaction event;
      event.user_id = text::latin1_to_utf8(fields[0]);
      event.item_id = text::latin1_to_utf8(fields[1]);
      event.rating = *rating;
      event.label = binarize_label(event.rating, DatasetKind::kBookCrossing);
      out.interactions.push_back(std::move(event));
      reader.accepted();
    }
    reader.finish();
    out.report.files.push_back(std::move(report));
  }
}

void drop_unknown_items(ParsedDataset& out) {
  std::unordered_set<std::string_view> known;
  known.reserve(out.catalog.size());
  for (const auto& item : out.catalog) known.insert(item.item_id);
  const auto before = out.interactions.size();
  std::erase_if(out.interactions, [&](const Interaction& e) {
    return !known.contains(e.item_id);
  });
  out.report.unknown_item_interactions = before - out.interactions.size();
}

void check_unique_items(const std::vector<ItemRecord>& catalog) {
  std::unordered_set<std::string_view> seen;
  seen.reserve(catalog.size());
  for (const auto& item : catalog) {
    if (!seen.insert(item.item_id).second) {
      throw_data_error(fmt::format("duplicate item id {} in catalog", item.item_id));
    }
  }
}

}  // namespace

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kBookCrossing:
      return "bookcrossing";
    case DatasetKind::kMovieLens1M:
      return "ml-1m";
    case DatasetKind::kMovieLens25M:
      return "ml-25m";
  }
  return "unknown";
}

DatasetKind parse_dataset_kind(std::string_view name) {
  if (name == "bookcrossing") return DatasetKind::kBookCrossing;
  if (name == "ml-1m") return DatasetKind::kMovieLens1M;
  if (name == "ml-25m") return DatasetKind::kMovieLens25M;
  throw_config_error(fmt::format("unknown dataset kind '{}'", name));
}

bool has_timestamps(DatasetKind kind) { return kind != DatasetKind::kBookCrossing; }

std::string_view to_string(Split split) {
  return split == Split::kTrain ? "train" : "test";
}

const std::string* ItemRecord::attribute(std::string_view name) const {
  for (const auto& [key, value] : attributes) {
    if (key == name) return &value;
  }
  return nullptr;
}

std::string normalize_genre(std::string_view genre) {
  return text::to_lower_ascii(text::trim(genre));
}

DatasetPaths DatasetPaths::in_directory(DatasetKind kind,
                                        const std::filesystem::path& dir) {
  switch (kind) {
    case DatasetKind::kMovieLens1M:
      return {dir / "ratings.dat", dir / "movies.dat", dir / "users.dat"};
    case DatasetKind::kMovieLens25M:
      return {dir / "ratings.csv", dir / "movies.csv", {}};
    case DatasetKind::kBookCrossing:
      return {dir / "BX-Book-Ratings.csv", dir / "BX-Books.csv", dir / "BX-Users.csv"};
  }
  return {};
}

std::size_t ParseReport::total_malformed() const {
  std::size_t n = 0;
  for (const auto& f : files) n += f.malformed;
  return n;
}

ParsedDataset parse_dataset(DatasetKind kind, const DatasetPaths& paths) {
  for (const auto* p : {&paths.ratings, &paths.items}) {
    if (!std::filesystem::exists(*p)) {
      throw_data_error(fmt::format("missing dataset file {}", p->string()));
    }
  }
  if (!paths.users.empty() && !std::filesystem::exists(paths.users)) {
    throw_data_error(fmt::format("missing dataset file {}", paths.users.string()));
  }

  ParsedDataset out;
  out.kind = kind;
  switch (kind) {
    case DatasetKind::kMovieLens1M:
      parse_ml1m(paths, out);
      break;
    case DatasetKind::kMovieLens25M:
      parse_ml25m(paths, out);
      break;
    case DatasetKind::kBookCrossing:
      parse_bookcrossing(paths, out);
      break;
  }
  check_unique_items(out.catalog);
  drop_unknown_items(out);
  return out;
}

bool binarize_label(double rating, DatasetKind kind) {
  if (!rating_in_range(rating, kind)) {
    throw_data_error(fmt::format("rating {} out of range for {}", rating, to_string(kind)));
  }
  switch (kind) {
    case DatasetKind::kBookCrossing:
      return rating > 5.0;
    case DatasetKind::kMovieLens1M:
      return rating >= 4.0;
    case DatasetKind::kMovieLens25M:
      return rating > 3.0;
  }
  return false;
}

std::vector<UserSequence> build_sequences(std::span<const Interaction> interactions,
                                          DatasetKind kind) {
  std::vector<UserSequence> sequences;
  std::unordered_map<std::string_view, std::size_t> index;
  for (const auto& event : interactions) {
    auto [it, inserted] = index.try_emplace(event.user_id, sequences.size());
    if (inserted) sequences.push_back(UserSequence{event.user_id, {}});
    sequences[it->second].events.push_back(event);
  }
  if (has_timestamps(kind)) {
    for (auto& seq : sequences) {
      for (const auto& e : seq.events) {
        if (!e.timestamp) {
          throw_data_error(fmt::format("{} interaction of user {} lacks a timestamp",
                                       to_string(kind), seq.user_id));
        }
      }
      std::stable_sort(seq.events.begin(), seq.events.end(),
                       [](const Interaction& a, const Interaction& b) {
                         return *a.timestamp < *b.timestamp;
                       });
    }
  }
  return sequences;
}

std::vector<Sample> build_samples(std::span<const UserSequence> sequences,
                                  DatasetKind kind, const SampleOptions& options) {
  std::vector<Sample> samples;
  for (std::size_t u = 0; u < sequences.size(); ++u) {
    const auto& events = sequences[u].events;
    for (std::size_t pos = kMinHistory; pos < events.size(); ++pos) {
      Sample s;
      s.sample_id = static_cast<std::int64_t>(samples.size());
      s.user_index = u;
      s.target_position = pos;
      s.label = events[pos].label;
      s.timestamp = events[pos].timestamp;
      samples.push_back(s);
    }
  }

  if (has_timestamps(kind)) {
    // Global-timestamp quantile cut over samples: the latest 1/9 are test.
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return *samples[a].timestamp < *samples[b].timestamp;
    });
    const std::size_t n_test = samples.size() / 9;
    for (std::size_t i = samples.size() - n_test; i < samples.size(); ++i) {
      samples[order[i]].split = Split::kTest;
    }
  } else {
    // Seeded user-level 9:1 split over users that produced samples.
    std::vector<std::size_t> users;
    for (const auto& s : samples) {
      if (users.empty() || users.back() != s.user_index) users.push_back(s.user_index);
    }
    std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
    keyed.reserve(users.size());
    for (const auto u : users) {
      keyed.emplace_back(text::hash_string(sequences[u].user_id, options.split_seed), u);
    }
    std::sort(keyed.begin(), keyed.end());
    const std::size_t n_test_users = (users.size() + 5) / 10;
    std::unordered_set<std::size_t> test_users;
    for (std::size_t i = 0; i < n_test_users; ++i) test_users.insert(keyed[i].second);
    for (auto& s : samples) {
      if (test_users.contains(s.user_index)) s.split = Split::kTest;
    }
  }
  return samples;
}

FewShotDraw sample_few_shot(std::span<const Sample> train, std::size_t n_shot,
                            std::uint64_t seed) {
  if (n_shot > train.size()) {
    throw_config_error(fmt::format("n_shot {} exceeds training split size {}", n_shot,
                                   train.size()));
  }
  std::vector<std::pair<std::uint64_t, std::int64_t>> keyed;
  keyed.reserve(train.size());
  std::unordered_set<std::int64_t> seen;
  for (const auto& s : train) {
    if (s.split != Split::kTrain) {
      throw_config_error(fmt::format("sample {} is not in the training split", s.sample_id));
    }
    if (!seen.insert(s.sample_id).second) {
      throw_config_error(fmt::format("duplicate sample id {}", s.sample_id));
    }
    const auto key = text::mix64(text::mix64(seed) ^ static_cast<std::uint64_t>(s.sample_id));
    keyed.emplace_back(key, s.sample_id);
  }
  std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(n_shot),
                    keyed.end());
  FewShotDraw draw;
  draw.n_shot = n_shot;
  draw.seed = seed;
  draw.selected_ids.reserve(n_shot);
  for (std::size_t i = 0; i < n_shot; ++i) draw.selected_ids.push_back(keyed[i].second);
  return draw;
}

Corpus::Corpus(DatasetKind kind, std::vector<ItemRecord> catalog,
               std::vector<UserRecord> users, std::vector<UserSequence> sequences,
               std::vector<Sample> samples)
    : kind_(kind),
      catalog_(std::move(catalog)),
      users_(std::move(users)),
      sequences_(std::move(sequences)),
      samples_(std::move(samples)) {
  item_index_.reserve(catalog_.size());
  for (std::size_t i = 0; i < catalog_.size(); ++i) {
    if (!item_index_.emplace(catalog_[i].item_id, i).second) {
      throw_data_error(fmt::format("duplicate item id {} in catalog", catalog_[i].item_id));
    }
  }
  user_index_.reserve(users_.size());
  for (std::size_t i = 0; i < users_.size(); ++i) user_index_.emplace(users_[i].user_id, i);
  sample_index_.reserve(samples_.size());
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    if (s.user_index >= sequences_.size() ||
        s.target_position >= sequences_[s.user_index].events.size()) {
      throw_data_error(fmt::format("sample {} references a missing event", s.sample_id));
    }
    sample_index_.emplace(s.sample_id, i);
  }
  for (const auto& seq : sequences_) {
    for (const auto& e : seq.events) {
      if (!item_index_.contains(e.item_id)) {
        throw_data_error(fmt::format("interaction references unknown item {}", e.item_id));
      }
    }
  }
}

Corpus Corpus::from_parsed(ParsedDataset parsed, const SampleOptions& options) {
  auto sequences = build_sequences(parsed.interactions, parsed.kind);
  auto samples = build_samples(sequences, parsed.kind, options);
  return Corpus(parsed.kind, std::move(parsed.catalog), std::move(parsed.users),
                std::move(sequences), std::move(samples));
}

const ItemRecord* Corpus::find_item(std::string_view item_id) const {
  const auto it = item_index_.find(std::string(item_id));
  return it == item_index_.end() ? nullptr : &catalog_[it->second];
}

const ItemRecord& Corpus::item(std::string_view item_id) const {
  const auto* item = find_item(item_id);
  if (item == nullptr) throw_data_error(fmt::format("unknown item {}", item_id));
  return *item;
}

const Sample& Corpus::sample(std::int64_t sample_id) const {
  const auto it = sample_index_.find(sample_id);
  if (it == sample_index_.end()) throw_data_error(fmt::format("unknown sample {}", sample_id));
  return samples_[it->second];
}

const UserSequence& Corpus::sequence(const Sample& s) const {
  return sequences_.at(s.user_index);
}

std::span<const Interaction> Corpus::history(const Sample& s) const {
  const auto& events = sequence(s).events;
  return std::span<const Interaction>(events).first(s.target_position);
}

const Interaction& Corpus::target_event(const Sample& s) const {
  return sequence(s).events.at(s.target_position);
}

const ItemRecord& Corpus::target(const Sample& s) const {
  return item(target_event(s).item_id);
}

const UserProfile& Corpus::profile(const Sample& s) const {
  const auto it = user_index_.find(sequence(s).user_id);
  return it == user_index_.end() ? empty_profile_ : users_[it->second].profile;
}

std::vector<Sample> Corpus::samples_in(Split split) const {
  std::vector<Sample> out;
  for (const auto& s : samples_) {
    if (s.split == split) out.push_back(s);
  }
  return out;
}

}  // namespace recprompt
