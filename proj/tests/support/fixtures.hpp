#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "recprompt/corpus.hpp"
#include "recprompt/retrieval.hpp"

namespace recprompt::testing {

std::filesystem::path test_data_dir();

// Parsed corpus for tests/fixtures/<dataset>.
Corpus load_fixture(DatasetKind kind);

// Genre-indicator vectors for MovieLens, 16-dim seeded hash for BookCrossing.
VectorStore fixture_vectors(const Corpus& corpus);

struct GoldenCase {
  std::string file_name;  // relative to tests/golden
  std::string text;       // rendered input, blank line, "=> " + output
};

// Every fixture sample in both variants at k = 3 under template v1.
std::vector<GoldenCase> render_golden_cases();

}  // namespace recprompt::testing
