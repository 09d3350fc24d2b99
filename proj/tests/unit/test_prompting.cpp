#include <doctest.h>

#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "recprompt/encoder.hpp"
#include "recprompt/error.hpp"
#include "recprompt/prompting.hpp"
#include "recprompt/text.hpp"
#include "fixtures.hpp"
#include "synthetic.hpp"

using namespace recprompt;
using namespace recprompt::testing;

namespace {

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

bool contains_ci(std::string_view hay, std::string_view needle) {
  return text::to_lower_ascii(hay).find(text::to_lower_ascii(needle)) != std::string::npos;
}

Corpus fixture(DatasetKind kind) { return load_fixture(kind); }

}  // namespace

TEST_CASE("fixture samples match the golden prompts") {
  const bool update = std::getenv("RECPROMPT_UPDATE_GOLDEN") != nullptr;
  const auto cases = render_golden_cases();
  CHECK(cases.size() == 26);
  for (const auto& c : cases) {
    const auto path = test_data_dir() / "golden" / c.file_name;
    CAPTURE(c.file_name);
    if (update) std::ofstream(path, std::ios::binary) << c.text;
    REQUIRE(std::filesystem::exists(path));
    CHECK(read_all(path) == c.text);
  }
}

TEST_CASE("no pure-ID field reaches a rendered input") {
  SyntheticOptions o;
  o.users = 25;
  for (const auto& ds : {make_ml1m(o), make_ml25m(o), make_bookcrossing(o)}) {
    const auto corpus = Corpus::from_parsed(ds);
    const auto tmpl = PromptTemplate::builtin(corpus.kind());
    for (const auto& s : corpus.samples()) {
      const auto pair = render_sample(corpus, s, top_recent(corpus, s, 30), tmpl,
                                      Variant::kOriginal, 30);
      for (const auto& field : pure_id_field_names(corpus.kind())) {
        CHECK_FALSE(contains_ci(pair.input, field));
      }
      if (corpus.kind() == DatasetKind::kMovieLens1M) {
        CHECK(pair.input.find(corpus.profile(s).at("zipcode")) == std::string::npos);
      }
      if (corpus.kind() == DatasetKind::kBookCrossing) {
        for (const auto& id : pair.meta.history_item_ids) {
          CHECK(pair.input.find(id) == std::string::npos);
        }
        CHECK(pair.input.find(pair.meta.target_item_id) == std::string::npos);
      }
    }
  }
}

TEST_CASE("rendering is chronological and carries metadata") {
  const auto corpus = fixture(DatasetKind::kMovieLens1M);
  const auto& s = corpus.samples().back();
  const auto w = top_recent(corpus, s, 4);
  const auto pair = render_sample(corpus, s, w, PromptTemplate::builtin(corpus.kind()),
                                  Variant::kOriginal, 4);
  CHECK(pair.meta.history_item_ids == w.item_ids());
  CHECK(pair.meta.template_version == "v1");
  CHECK(pair.output == (s.label ? "Yes" : "No"));
  std::size_t last = 0;
  for (int pos = 1; pos <= 4; ++pos) {
    const auto at = pair.input.find(fmt::format("\n{}. \"", pos));
    REQUIRE(at != std::string::npos);
    CHECK(at > last);
    last = at;
  }
}

TEST_CASE("ml-1m profile codes are decoded") {
  const auto corpus = fixture(DatasetKind::kMovieLens1M);
  const auto pair = render_sample(corpus, corpus.samples().front(),
                                  top_recent(corpus, corpus.samples().front(), 3),
                                  PromptTemplate::builtin(corpus.kind()), Variant::kOriginal, 3);
  CHECK(pair.input.find("The user is female.") != std::string::npos);
  CHECK(pair.input.find("age is under 18") != std::string::npos);
  CHECK(pair.input.find("K-12 student") != std::string::npos);
}

TEST_CASE("windows outside the history are rejected") {
  const auto corpus = fixture(DatasetKind::kMovieLens1M);
  const auto& s = corpus.samples().front();
  auto w = top_recent(corpus, s, 3);
  w.entries.back().history_index = 99;
  CHECK_THROWS_AS(render_sample(corpus, s, w, PromptTemplate::builtin(corpus.kind()),
                                Variant::kOriginal, 3),
                  Error);
  CHECK_THROWS_AS(render_sample(corpus, s, top_recent(corpus, s, 3),
                                PromptTemplate::builtin(DatasetKind::kMovieLens25M),
                                Variant::kOriginal, 3),
                  Error);
}

TEST_CASE("template validation") {
  const std::string head = "@template ml-25m v9\n@section history_header\nH\n"
                           "@section history_entry\n{position}. {title} ({preference})\n";
  CHECK_NOTHROW(PromptTemplate::parse(head + "@section task\nT {title}\n"));
  CHECK(PromptTemplate::parse(head + "@section task\nT {title}\n").version() == "v9");
  CHECK_THROWS_AS(PromptTemplate::parse(head + "@section task\nT {item_id}\n"), Error);
  CHECK_THROWS_AS(PromptTemplate::parse(head + "@section task\nThe Movie ID is {title}\n"),
                  Error);
  CHECK_THROWS_AS(PromptTemplate::parse(head + "@section task\nT {nonsense}\n"), Error);
  CHECK_THROWS_AS(PromptTemplate::parse("@section task\nT\n"), Error);
}

TEST_CASE("template files on disk match the compiled-in copies") {
  for (const auto kind :
       {DatasetKind::kMovieLens1M, DatasetKind::kMovieLens25M, DatasetKind::kBookCrossing}) {
    const auto dir = test_data_dir().parent_path() / "core" / "templates";
    const auto from_disk = PromptTemplate::load_from_directory(dir, kind, "v1");
    CHECK(read_all(dir / fmt::format("{}.v1.tmpl", to_string(kind))) ==
          builtin_template_source(kind));
    CHECK(from_disk.version() == "v1");
  }
}

TEST_CASE("token budget") {
  RenderedPair p;
  p.input = "abcdefghij";
  CHECK(estimate_token_budget(p, 4.0).estimate == 3);
  CHECK_FALSE(estimate_token_budget(p, 4.0).over_limit);
  CHECK(estimate_token_budget(p, 1.0, 5).over_limit);
  CHECK_THROWS_AS(estimate_token_budget(p, 0.0), Error);
}
