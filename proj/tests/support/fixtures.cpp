#include "fixtures.hpp"

#include <fmt/format.h>

#include "recprompt/encoder.hpp"
#include "recprompt/prompting.hpp"

namespace recprompt::testing {

std::filesystem::path test_data_dir() { return RECPROMPT_TEST_DATA_DIR; }

Corpus load_fixture(DatasetKind kind) {
  const auto dir = test_data_dir() / "fixtures" / std::string(to_string(kind));
  return Corpus::from_parsed(parse_dataset(kind, DatasetPaths::in_directory(kind, dir)));
}

VectorStore fixture_vectors(const Corpus& corpus) {
  const auto mode = corpus.kind() != DatasetKind::kMovieLens1M ? BuiltinMode::kSeededHash
                                                                : BuiltinMode::kGenreIndicator;
  BuiltinParams p;
  p.hash_dim = 16;
  p.seed = 1;
  BuiltinBackend backend(corpus.catalog(), mode, p);
  return VectorStore(
      acquire_embeddings(render_item_descriptions(corpus.catalog(), corpus.kind()), backend));
}

std::vector<GoldenCase> render_golden_cases() {
  std::vector<GoldenCase> out;
  for (const auto kind :
       {DatasetKind::kMovieLens1M, DatasetKind::kMovieLens25M, DatasetKind::kBookCrossing}) {
    const auto corpus = load_fixture(kind);
    const auto vectors = fixture_vectors(corpus);
    const auto tmpl = PromptTemplate::builtin(kind);
    RetrievalConfig cfg;
    cfg.k = 3;
    for (const auto& s : corpus.samples()) {
      for (const auto variant : {Variant::kOriginal, Variant::kRetrieved}) {
        const auto window = variant == Variant::kOriginal ? top_recent(corpus, s, cfg.k)
                                                          : subr_top_k(corpus, s, vectors, cfg);
        const auto pair = render_sample(corpus, s, window, tmpl, variant, cfg.k);
        out.push_back({fmt::format("{}.sample{}.{}.txt", to_string(kind), s.sample_id,
                                   to_string(variant)),
                       pair.input + "\n\n=> " + pair.output + "\n"});
      }
    }
  }
  return out;
}

}  // namespace recprompt::testing
