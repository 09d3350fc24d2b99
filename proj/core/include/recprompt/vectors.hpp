#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace recprompt {

// Row-major table of float vectors keyed by item id. Used for raw
// embeddings (D columns) and reduced semantic vectors (d columns).
struct VectorTable {
  std::vector<std::string> ids;
  std::size_t dim = 0;
  std::vector<float> values;
  std::string source;  // backend id or "pca:<d>"

  std::size_t rows() const noexcept { return ids.size(); }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(values).subspan(i * dim, dim);
  }
  std::span<float> row(std::size_t i) {
    return std::span<float>(values).subspan(i * dim, dim);
  }

  // Throws a data error unless ids.size() * dim == values.size() and every
  // value is finite.
  void validate() const;
};

// On-disk vector file: <dir>/manifest.json, <dir>/vectors.bin, <dir>/ids.txt.
// vectors.bin is count x dim little-endian IEEE floats, row-major.
void write_vector_file(const std::filesystem::path& dir, const VectorTable& table);
VectorTable read_vector_file(const std::filesystem::path& dir);

// Double-precision rows in the same layout (dtype "f64le"). `manifest_extra`
// is a JSON object text merged into the manifest.
void write_f64_rows(const std::filesystem::path& dir, std::span<const std::string> ids,
                    std::size_t dim, std::span<const double> values,
                    std::string_view manifest_extra = "{}");

struct F64Rows {
  std::vector<std::string> ids;
  std::size_t dim = 0;
  std::vector<double> values;
  std::string manifest_json;
};
F64Rows read_f64_rows(const std::filesystem::path& dir);

}  // namespace recprompt
