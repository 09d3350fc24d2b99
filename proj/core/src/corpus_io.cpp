#include <fmt/format.h>

#include <fstream>
#include <nlohmann/json.hpp>

#include "recprompt/corpus.hpp"
#include "recprompt/error.hpp"
#include "recprompt/text.hpp"

namespace recprompt {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kCacheFormat = 1;

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_data_error(fmt::format("cannot write {}", path.string()));
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data_error(fmt::format("cannot open {}", path.string()));
  return in;
}

template <typename Fn>
void for_each_json_line(const std::filesystem::path& path, Fn&& fn) {
  auto in = open_in(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      fn(ordered_json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw_data_error(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
}

std::string format_rating(double rating, DatasetKind kind) {
  if (kind == DatasetKind::kMovieLens25M) return fmt::format("{:.1f}", rating);
  return fmt::format("{}", static_cast<long long>(rating));
}

std::string join_genres(const std::vector<std::string>& genres) {
  std::string out;
  for (std::size_t i = 0; i < genres.size(); ++i) {
    if (i > 0) out.push_back('|');
    out += genres[i];
  }
  return out;
}

std::string bx_quote(std::string_view utf8) {
  std::string out = "\"";
  for (const char c : text::utf8_to_latin1(utf8)) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

const std::string& attribute_or_empty(const ItemRecord& item, std::string_view name) {
  static const std::string kEmpty;
  const auto* value = item.attribute(name);
  return value == nullptr ? kEmpty : *value;
}

}  // namespace

void write_corpus_cache(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "corpus.json");
    ordered_json meta;
    meta["format"] = kCacheFormat;
    meta["dataset"] = std::string(to_string(corpus.kind()));
    meta["items"] = corpus.catalog().size();
    meta["users"] = corpus.users().size();
    meta["sequences"] = corpus.sequences().size();
    meta["samples"] = corpus.samples().size();
    out << meta.dump(2) << '\n';
  }
  {
    auto out = open_out(dir / "items.jsonl");
    for (const auto& item : corpus.catalog()) {
      ordered_json j;
      j["item_id"] = item.item_id;
      j["title"] = item.title;
      j["attributes"] = ordered_json::object();
      for (const auto& [k, v] : item.attributes) j["attributes"][k] = v;
      j["genres"] = item.genres;
      out << j.dump() << '\n';
    }
  }
  {
    auto out = open_out(dir / "users.jsonl");
    for (const auto& user : corpus.users()) {
      ordered_json j;
      j["user_id"] = user.user_id;
      j["profile"] = ordered_json::object();
      for (const auto& [k, v] : user.profile) j["profile"][k] = v;
      out << j.dump() << '\n';
    }
  }
  {
    auto out = open_out(dir / "interactions.jsonl");
    for (const auto& seq : corpus.sequences()) {
      for (const auto& e : seq.events) {
        ordered_json j;
        j["user_id"] = e.user_id;
        j["item_id"] = e.item_id;
        j["rating"] = e.rating;
        j["timestamp"] = e.timestamp ? ordered_json(*e.timestamp) : ordered_json(nullptr);
        j["label"] = e.label;
        out << j.dump() << '\n';
      }
    }
  }
  {
    auto out = open_out(dir / "samples.jsonl");
    for (const auto& s : corpus.samples()) {
      ordered_json j;
      j["sample_id"] = s.sample_id;
      j["user_id"] = corpus.sequences()[s.user_index].user_id;
      j["target_position"] = s.target_position;
      j["label"] = s.label;
      j["split"] = std::string(to_string(s.split));
      j["timestamp"] = s.timestamp ? ordered_json(*s.timestamp) : ordered_json(nullptr);
      out << j.dump() << '\n';
    }
  }
}

Corpus read_corpus_cache(const std::filesystem::path& dir) {
  DatasetKind kind{};
  {
    auto in = open_in(dir / "corpus.json");
    ordered_json meta;
    try {
      in >> meta;
    } catch (const nlohmann::json::exception& e) {
      throw_data_error(fmt::format("{}: {}", (dir / "corpus.json").string(), e.what()));
    }
    if (meta.value("format", 0) != kCacheFormat) {
      throw_data_error(fmt::format("{}: unsupported corpus cache format", dir.string()));
    }
    kind = parse_dataset_kind(meta.at("dataset").get<std::string>());
  }

  std::vector<ItemRecord> catalog;
  for_each_json_line(dir / "items.jsonl", [&](const ordered_json& j) {
    ItemRecord item;
    item.item_id = j.at("item_id").get<std::string>();
    item.title = j.at("title").get<std::string>();
    for (const auto& [k, v] : j.at("attributes").items()) {
      item.attributes.emplace_back(k, v.get<std::string>());
    }
    item.genres = j.at("genres").get<std::vector<std::string>>();
    catalog.push_back(std::move(item));
  });

  std::vector<UserRecord> users;
  for_each_json_line(dir / "users.jsonl", [&](const ordered_json& j) {
    UserRecord user;
    user.user_id = j.at("user_id").get<std::string>();
    for (const auto& [k, v] : j.at("profile").items()) user.profile[k] = v.get<std::string>();
    users.push_back(std::move(user));
  });

  // Interactions are stored in sequence order, so no re-sorting here.
  std::vector<UserSequence> sequences;
  std::unordered_map<std::string, std::size_t> seq_index;
  for_each_json_line(dir / "interactions.jsonl", [&](const ordered_json& j) {
    Interaction e;
    e.user_id = j.at("user_id").get<std::string>();
    e.item_id = j.at("item_id").get<std::string>();
    e.rating = j.at("rating").get<double>();
    if (!j.at("timestamp").is_null()) e.timestamp = j.at("timestamp").get<std::int64_t>();
    e.label = j.at("label").get<bool>();
    auto [it, inserted] = seq_index.try_emplace(e.user_id, sequences.size());
    if (inserted) sequences.push_back(UserSequence{e.user_id, {}});
    sequences[it->second].events.push_back(std::move(e));
  });

  std::vector<Sample> samples;
  for_each_json_line(dir / "samples.jsonl", [&](const ordered_json& j) {
    Sample s;
    s.sample_id = j.at("sample_id").get<std::int64_t>();
    const auto user_id = j.at("user_id").get<std::string>();
    const auto it = seq_index.find(user_id);
    if (it == seq_index.end()) {
      throw_data_error(fmt::format("sample {} references unknown user {}", s.sample_id, user_id));
    }
    s.user_index = it->second;
    s.target_position = j.at("target_position").get<std::size_t>();
    s.label = j.at("label").get<bool>();
    const auto split = j.at("split").get<std::string>();
    if (split != "train" && split != "test") {
      throw_data_error(fmt::format("sample {} has unknown split '{}'", s.sample_id, split));
    }
    s.split = split == "train" ? Split::kTrain : Split::kTest;
    if (!j.at("timestamp").is_null()) s.timestamp = j.at("timestamp").get<std::int64_t>();
    samples.push_back(s);
  });

  return Corpus(kind, std::move(catalog), std::move(users), std::move(sequences),
                std::move(samples));
}

void write_native_dataset(const ParsedDataset& dataset, const DatasetPaths& paths) {
  const auto kind = dataset.kind;
  switch (kind) {
    case DatasetKind::kMovieLens1M: {
      auto items = open_out(paths.items);
      for (const auto& item : dataset.catalog) {
        items << item.item_id << "::" << text::utf8_to_latin1(item.title) << "::"
              << text::utf8_to_latin1(join_genres(item.genres)) << '\n';
      }
      if (!paths.users.empty()) {
        auto users = open_out(paths.users);
        for (const auto& u : dataset.users) {
          users << u.user_id << "::" << u.profile.at("gender") << "::" << u.profile.at("age")
                << "::" << u.profile.at("occupation") << "::"
                << text::utf8_to_latin1(u.profile.at("zipcode")) << '\n';
        }
      }
      auto ratings = open_out(paths.ratings);
      for (const auto& e : dataset.interactions) {
        ratings << e.user_id << "::" << e.item_id << "::" << format_rating(e.rating, kind)
                << "::" << e.timestamp.value_or(0) << '\n';
      }
      break;
    }
    case DatasetKind::kMovieLens25M: {
      auto items = open_out(paths.items);
      items << "movieId,title,genres\n";
      for (const auto& item : dataset.catalog) {
        const auto genres =
            item.genres.empty() ? std::string("(no genres listed)") : join_genres(item.genres);
        items << item.item_id << ',' << text::quote_if_needed(item.title, ',') << ','
              << text::quote_if_needed(genres, ',') << '\n';
      }
      auto ratings = open_out(paths.ratings);
      ratings << "userId,movieId,rating,timestamp\n";
      for (const auto& e : dataset.interactions) {
        ratings << e.user_id << ',' << e.item_id << ',' << format_rating(e.rating, kind) << ','
                << e.timestamp.value_or(0) << '\n';
      }
      break;
    }
    case DatasetKind::kBookCrossing: {
      auto items = open_out(paths.items);
      items << "\"ISBN\";\"Book-Title\";\"Book-Author\";\"Year-Of-Publication\";"
               "\"Publisher\";\"Image-URL-S\";\"Image-URL-M\";\"Image-URL-L\"\n";
      for (const auto& item : dataset.catalog) {
        items << bx_quote(item.item_id) << ';' << bx_quote(item.title);
        for (const auto* name : {"author", "year", "publisher", "image_url_s", "image_url_m",
                                 "image_url_l"}) {
          items << ';' << bx_quote(attribute_or_empty(item, name));
        }
        items << '\n';
      }
      if (!paths.users.empty()) {
        auto users = open_out(paths.users);
        users << "\"User-ID\";\"Location\";\"Age\"\n";
        for (const auto& u : dataset.users) {
          const auto age = u.profile.find("age");
          users << bx_quote(u.user_id) << ';' << bx_quote(u.profile.at("location")) << ';'
                << (age == u.profile.end() ? std::string("NULL") : bx_quote(age->second))
                << '\n';
        }
      }
      auto ratings = open_out(paths.ratings);
      ratings << "\"User-ID\";\"ISBN\";\"Book-Rating\"\n";
      for (const auto& e : dataset.interactions) {
        ratings << bx_quote(e.user_id) << ';' << bx_quote(e.item_id) << ';'
                << bx_quote(format_rating(e.rating, kind)) << '\n';
      }
      break;
    }
  }
}

}  // namespace recprompt
