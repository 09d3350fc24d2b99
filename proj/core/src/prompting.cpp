#include "recprompt/prompting.hpp"

#include <fmt/format.h>

#include <array>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "builtin_templates.hpp"
#include "recprompt/error.hpp"
#include "recprompt/text.hpp"

namespace recprompt {
namespace {

constexpr std::array<std::string_view, 5> kForbiddenPlaceholders = {
    "user_id", "item_id", "movie_id", "isbn", "zipcode"};

constexpr std::array<std::string_view, 6> kForbiddenLiterals = {
    "user id", "movie id", "isbn", "zipcode", "zip-code", "zip code"};

std::string_view ml1m_age(std::string_view code) {
  if (code == "1") return "under 18";
  if (code == "18") return "18-24";
  if (code == "25") return "25-34";
  if (code == "35") return "35-44";
  if (code == "45") return "45-49";
  if (code == "50") return "50-55";
  if (code == "56") return "56 or older";
  return {};
}

std::string_view ml1m_occupation(std::string_view code) {
  static constexpr std::array<std::string_view, 21> kNames = {
      "other",
      "academic/educator",
      "artist",
      "clerical/admin",
      "college/grad student",
      "customer service",
      "doctor/health care",
      "executive/managerial",
      "farmer",
      "homemaker",
      "K-12 student",
      "lawyer",
      "programmer",
      "retired",
      "sales/marketing",
      "scientist",
      "self-employed",
      "technician/engineer",
      "tradesman/craftsman",
      "unemployed",
      "writer",
  };
  int value = -1;
  try {
    std::size_t used = 0;
    value = std::stoi(std::string(code), &used);
    if (used != code.size()) return {};
  } catch (const std::exception&) {
    return {};
  }
  if (value < 0 || value >= static_cast<int>(kNames.size())) return {};
  return kNames[static_cast<std::size_t>(value)];
}

std::optional<std::string> profile_value(DatasetKind kind, const UserProfile& profile,
                                         std::string_view field) {
  const auto it = profile.find(std::string(field));
  if (it == profile.end()) return std::nullopt;
  const auto raw = text::trim(it->second);
  if (raw.empty()) return std::nullopt;
  if (kind == DatasetKind::kMovieLens1M) {
    if (field == "gender") {
      if (raw == "M") return "male";
      if (raw == "F") return "female";
      return std::nullopt;
    }
    if (field == "age") {
      const auto v = ml1m_age(raw);
      return v.empty() ? std::nullopt : std::optional<std::string>(v);
    }
    if (field == "occupation") {
      const auto v = ml1m_occupation(raw);
      return v.empty() ? std::nullopt : std::optional<std::string>(v);
    }
  }
  return std::string(raw);
}

std::optional<std::string> item_value(const ItemRecord& item, std::string_view field) {
  if (field == "title") return item.title;
  if (field == "genres") {
    if (item.genres.empty()) return std::nullopt;
    std::string out;
    for (std::size_t i = 0; i < item.genres.size(); ++i) {
      if (i > 0) out += ", ";
      out += item.genres[i];
    }
    return out;
  }
  const auto* value = item.attribute(field);
  if (value == nullptr) return std::nullopt;
  const auto v = text::trim(*value);
  if (v.empty() || (field == "year" && v == "0")) return std::nullopt;
  return std::string(v);
}

PromptTemplate::Line parse_line(std::string_view line) {
  PromptTemplate::Line out;
  std::string literal;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '{' && i + 1 < line.size() && line[i + 1] == '{') {
      literal.push_back('{');
      ++i;
    } else if (c == '}' && i + 1 < line.size() && line[i + 1] == '}') {
      literal.push_back('}');
      ++i;
    } else if (c == '{') {
      const auto close = line.find('}', i + 1);
      if (close == std::string_view::npos) {
        throw_config_error(fmt::format("unterminated placeholder in template line '{}'", line));
      }
      if (!literal.empty()) out.push_back({false, std::move(literal)});
      literal.clear();
      out.push_back({true, std::string(line.substr(i + 1, close - i - 1))});
      i = close;
    } else if (c == '}') {
      throw_config_error(fmt::format("stray '}}' in template line '{}'", line));
    } else {
      literal.push_back(c);
    }
  }
  if (!literal.empty()) out.push_back({false, std::move(literal)});
  return out;
}

void check_line(const PromptTemplate::Line& line, std::string_view section,
                std::span<const std::string_view> allowed) {
  for (const auto& seg : line) {
    if (!seg.placeholder) {
      const auto lower = text::to_lower_ascii(seg.text);
      for (const auto bad : kForbiddenLiterals) {
        if (lower.find(bad) != std::string::npos) {
          throw_config_error(
              fmt::format("template section {} mentions pure-ID field '{}'", section, bad));
        }
      }
      continue;
    }
    for (const auto bad : kForbiddenPlaceholders) {
      if (seg.text == bad) {
        throw_config_error(fmt::format("template section {} uses pure-ID placeholder {{{}}}",
                                       section, seg.text));
      }
    }
    if (std::find(allowed.begin(), allowed.end(), seg.text) == allowed.end()) {
      throw_config_error(
          fmt::format("placeholder {{{}}} is not allowed in section {}", seg.text, section));
    }
  }
}

std::span<const std::string_view> profile_fields(DatasetKind kind) {
  static constexpr std::array<std::string_view, 3> kMl1m = {"gender", "age", "occupation"};
  static constexpr std::array<std::string_view, 2> kBook = {"location", "age"};
  switch (kind) {
    case DatasetKind::kMovieLens1M:
      return kMl1m;
    case DatasetKind::kBookCrossing:
      return kBook;
    case DatasetKind::kMovieLens25M:
      return {};
  }
  return {};
}

// Substitutes placeholders; returns nullopt when a value is missing.
template <typename Lookup>
std::optional<std::string> fill(const PromptTemplate::Line& line, Lookup&& lookup) {
  std::string out;
  for (const auto& seg : line) {
    if (!seg.placeholder) {
      out += seg.text;
      continue;
    }
    auto value = lookup(seg.text);
    if (!value) return std::nullopt;
    out += *value;
  }
  return out;
}

template <typename Lookup>
std::string fill_section(const std::vector<PromptTemplate::Line>& lines, Lookup&& lookup) {
  std::string out;
  for (const auto& line : lines) {
    auto filled = fill(line, lookup);
    if (!filled || filled->empty()) continue;
    if (!out.empty()) out.push_back(' ');
    out += *filled;
  }
  return out;
}

std::string single_line(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return out;
}

}  // namespace

std::string_view to_string(Variant variant) {
  return variant == Variant::kOriginal ? "original" : "retrieved";
}

Variant parse_variant(std::string_view name) {
  if (name == "original") return Variant::kOriginal;
  if (name == "retrieved") return Variant::kRetrieved;
  throw_data_error(fmt::format("unknown variant '{}'", name));
}

PromptTemplate PromptTemplate::parse(std::string_view source) {
  PromptTemplate tmpl;
  bool have_header = false;
  bool have_entry = false;
  std::string section;
  std::istringstream in{std::string(source)};
  std::string raw;
  while (std::getline(in, raw)) {
    const auto line = text::strip_cr(raw);
    if (line.starts_with("#")) continue;
    if (line.starts_with("@template")) {
      std::istringstream words(line.substr(9));
      std::string dataset;
      words >> dataset >> tmpl.version_;
      if (dataset.empty() || tmpl.version_.empty()) {
        throw_config_error("@template needs a dataset and a version");
      }
      tmpl.kind_ = parse_dataset_kind(dataset);
      have_header = true;
      continue;
    }
    if (line.starts_with("@section")) {
      if (!have_header) throw_config_error("template must start with @template");
      section = std::string(text::trim(std::string_view(line).substr(8)));
      if (section != "profile" && section != "history_header" &&
          section != "history_entry" && section != "task") {
        throw_config_error(fmt::format("unknown template section '{}'", section));
      }
      continue;
    }
    if (section.empty()) {
      if (text::trim(line).empty()) continue;
      throw_config_error(fmt::format("template text outside a section: '{}'", line));
    }
    if (text::trim(line).empty()) continue;
    auto parsed = parse_line(line);
    if (section == "profile") {
      check_line(parsed, section, profile_fields(tmpl.kind_));
      tmpl.profile_.push_back(std::move(parsed));
    } else if (section == "history_header") {
      static constexpr std::array<std::string_view, 1> kAllowed = {"count"};
      check_line(parsed, section, kAllowed);
      tmpl.history_header_.push_back(std::move(parsed));
    } else if (section == "history_entry") {
      static constexpr std::array<std::string_view, 3> kAllowed = {"position", "title",
                                                                   "preference"};
      if (have_entry) throw_config_error("history_entry must be a single line");
      check_line(parsed, section, kAllowed);
      tmpl.history_entry_ = std::move(parsed);
      have_entry = true;
    } else {
      static constexpr std::array<std::string_view, 5> kAllowed = {"title", "genres", "author",
                                                                   "year", "publisher"};
      check_line(parsed, section, kAllowed);
      tmpl.task_.push_back(std::move(parsed));
    }
  }
  if (!have_header) throw_config_error("template lacks an @template line");
  if (!have_entry) throw_config_error("template lacks a history_entry line");
  if (tmpl.task_.empty()) throw_config_error("template lacks a task section");
  return tmpl;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_config_error(fmt::format("cannot open template {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

PromptTemplate PromptTemplate::builtin(DatasetKind kind) {
  return parse(builtin_template_source(kind));
}

PromptTemplate PromptTemplate::load_from_directory(const std::filesystem::path& dir,
                                                   DatasetKind kind,
                                                   std::string_view version) {
  auto tmpl = load(dir / fmt::format("{}.{}.tmpl", to_string(kind), version));
  if (tmpl.kind() != kind || tmpl.version() != version) {
    throw_config_error(fmt::format("template in {} declares {} {}", dir.string(),
                                   to_string(tmpl.kind()), tmpl.version()));
  }
  return tmpl;
}

std::string_view builtin_template_source(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kBookCrossing:
      return detail::kBookCrossingTemplateV1;
    case DatasetKind::kMovieLens1M:
      return detail::kMl1mTemplateV1;
    case DatasetKind::kMovieLens25M:
      return detail::kMl25mTemplateV1;
  }
  return {};
}

const std::vector<std::string>& pure_id_field_names(DatasetKind kind) {
  static const std::vector<std::string> kBook = {"User ID", "ISBN"};
  static const std::vector<std::string> kMl1m = {"User ID", "Movie ID", "Zipcode"};
  static const std::vector<std::string> kMl25m = {"User ID", "Movie ID"};
  switch (kind) {
    case DatasetKind::kBookCrossing:
      return kBook;
    case DatasetKind::kMovieLens1M:
      return kMl1m;
    case DatasetKind::kMovieLens25M:
      return kMl25m;
  }
  return kMl25m;
}

RenderedPair render_sample(const Corpus& corpus, const Sample& sample,
                           const RetrievedHistory& window, const PromptTemplate& tmpl,
                           Variant variant, std::size_t k) {
  if (tmpl.kind() != corpus.kind()) {
    throw_config_error(fmt::format("template for {} used on a {} corpus", to_string(tmpl.kind()),
                                   to_string(corpus.kind())));
  }
  const auto history = corpus.history(sample);
  for (const auto& e : window.entries) {
    if (e.history_index >= history.size() || history[e.history_index].item_id != e.item_id ||
        history[e.history_index].label != e.label) {
      throw_data_error(fmt::format("sample {}: window entry {} ({}) is not in its history",
                                   sample.sample_id, e.history_index, e.item_id));
    }
  }

  const auto& profile = corpus.profile(sample);
  const auto& target = corpus.target(sample);

  std::vector<std::string> blocks;
  auto profile_text = fill_section(tmpl.profile(), [&](std::string_view f) {
    return profile_value(tmpl.kind(), profile, f);
  });
  if (!profile_text.empty()) blocks.push_back(single_line(profile_text));

  const auto count = std::to_string(window.entries.size());
  auto header = fill_section(tmpl.history_header(), [&](std::string_view) {
    return std::optional<std::string>(count);
  });
  if (!header.empty()) blocks.push_back(std::move(header));

  RenderMeta meta;
  meta.sample_id = sample.sample_id;
  meta.user_id = corpus.sequence(sample).user_id;
  meta.target_item_id = target.item_id;
  meta.variant = variant;
  meta.k = k;
  meta.template_version = tmpl.version();

  for (std::size_t pos = 0; pos < window.entries.size(); ++pos) {
    const auto& entry = window.entries[pos];
    const auto& item = corpus.item(entry.item_id);
    auto line = fill(tmpl.history_entry(), [&](std::string_view f) -> std::optional<std::string> {
      if (f == "position") return std::to_string(pos + 1);
      if (f == "title") return single_line(item.title);
      return std::string(entry.label ? "liked" : "disliked");
    });
    blocks.push_back(std::move(*line));
    meta.history_item_ids.push_back(entry.item_id);
  }

  auto task = fill_section(tmpl.task(), [&](std::string_view f) {
    auto v = item_value(target, f);
    if (v) v = single_line(*v);
    return v;
  });
  blocks.push_back(std::move(task));

  RenderedPair pair;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i > 0) pair.input.push_back('\n');
    pair.input += blocks[i];
  }
  pair.output = std::string(sample.label ? kAnswerYes : kAnswerNo);
  pair.meta = std::move(meta);
  return pair;
}

TokenBudget estimate_token_budget(const RenderedPair& pair, double chars_per_token,
                                  std::size_t context_limit) {
  if (!(chars_per_token > 0.0)) throw_config_error("chars_per_token must be positive");
  const auto chars = static_cast<double>(text::utf8_length(pair.input));
  TokenBudget budget;
  budget.estimate = static_cast<std::size_t>(std::ceil(chars / chars_per_token));
  budget.over_limit = budget.estimate > context_limit;
  return budget;
}

}  // namespace recprompt
