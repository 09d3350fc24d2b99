#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "recprompt/corpus.hpp"
#include "recprompt/retrieval.hpp"

namespace recprompt {

enum class Variant { kOriginal, kRetrieved };

std::string_view to_string(Variant variant);
Variant parse_variant(std::string_view name);

// A parsed hard-prompt template. See core/templates/README.md for the file
// grammar.
class PromptTemplate {
 public:
  struct Segment {
    bool placeholder = false;
    std::string text;  // literal text, or the placeholder name
  };
  using Line = std::vector<Segment>;

  static PromptTemplate parse(std::string_view source);
  static PromptTemplate load(const std::filesystem::path& path);
  // The compiled-in v1 template for a dataset.
  static PromptTemplate builtin(DatasetKind kind);
  // <dir>/<dataset>.<version>.tmpl
  static PromptTemplate load_from_directory(const std::filesystem::path& dir,
                                            DatasetKind kind, std::string_view version);

  DatasetKind kind() const noexcept { return kind_; }
  const std::string& version() const noexcept { return version_; }
  const std::vector<Line>& profile() const noexcept { return profile_; }
  const std::vector<Line>& history_header() const noexcept { return history_header_; }
  const Line& history_entry() const noexcept { return history_entry_; }
  const std::vector<Line>& task() const noexcept { return task_; }

 private:
  DatasetKind kind_ = DatasetKind::kMovieLens1M;
  std::string version_;
  std::vector<Line> profile_;
  std::vector<Line> history_header_;
  Line history_entry_;
  std::vector<Line> task_;
};

// Source text of the compiled-in v1 template.
std::string_view builtin_template_source(DatasetKind kind);

// Field names that identify rather than describe, and so never reach a prompt.
const std::vector<std::string>& pure_id_field_names(DatasetKind kind);

struct RenderMeta {
  std::int64_t sample_id = 0;
  std::string user_id;
  std::string target_item_id;
  Variant variant = Variant::kOriginal;
  std::size_t k = 0;
  std::vector<std::string> history_item_ids;
  std::string template_version;

  friend bool operator==(const RenderMeta&, const RenderMeta&) = default;
};

struct RenderedPair {
  std::string input;
  std::string output;  // "Yes" or "No"
  RenderMeta meta;

  friend bool operator==(const RenderedPair&, const RenderedPair&) = default;
};

inline constexpr std::string_view kAnswerYes = "Yes";
inline constexpr std::string_view kAnswerNo = "No";

// Renders the sample's profile, the given history window and the target
// item. Pure-ID profile fields are never rendered. Throws a data error when
// the window names an event that is not in the sample's history.
RenderedPair render_sample(const Corpus& corpus, const Sample& sample,
                           const RetrievedHistory& window, const PromptTemplate& tmpl,
                           Variant variant, std::size_t k);

struct TokenBudget {
  std::size_t estimate = 0;
  bool over_limit = false;
};

// ceil(characters / chars_per_token); flags estimates above the limit.
TokenBudget estimate_token_budget(const RenderedPair& pair, double chars_per_token,
                                  std::size_t context_limit = 2048);

}  // namespace recprompt
