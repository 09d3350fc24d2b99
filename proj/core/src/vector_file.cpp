#include <fmt/format.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

#include "recprompt/error.hpp"
#include "recprompt/vectors.hpp"

namespace recprompt {
namespace {

using ordered_json = nlohmann::ordered_json;

template <typename Float, typename Bits>
void write_le(std::ofstream& out, std::span<const Float> values) {
  static_assert(sizeof(Float) == sizeof(Bits));
  std::vector<unsigned char> buf(values.size() * sizeof(Bits));
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<Bits>(values[i]);
    for (std::size_t b = 0; b < sizeof(Bits); ++b) {
      buf[i * sizeof(Bits) + b] = static_cast<unsigned char>(bits & 0xFFu);
      bits >>= 8;
    }
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

template <typename Float, typename Bits>
std::vector<Float> read_le(const std::filesystem::path& path, std::size_t count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data_error(fmt::format("cannot open {}", path.string()));
  const auto size = std::filesystem::file_size(path);
  if (size != count * sizeof(Bits)) {
    throw_data_error(fmt::format("{}: expected {} bytes, found {}", path.string(),
                                 count * sizeof(Bits), size));
  }
  std::vector<unsigned char> buf(size);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
  std::vector<Float> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    Bits bits = 0;
    for (std::size_t b = sizeof(Bits); b-- > 0;) {
      bits = static_cast<Bits>((bits << 8) | buf[i * sizeof(Bits) + b]);
    }
    values[i] = std::bit_cast<Float>(bits);
  }
  return values;
}

void write_ids(const std::filesystem::path& path, std::span<const std::string> ids) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_data_error(fmt::format("cannot write {}", path.string()));
  for (const auto& id : ids) {
    if (id.find_first_of("\r\n") != std::string::npos) {
      throw_data_error(fmt::format("item id '{}' contains a line break", id));
    }
    out << id << '\n';
  }
}

std::vector<std::string> read_ids(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data_error(fmt::format("cannot open {}", path.string()));
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) ids.push_back(line);
  return ids;
}

ordered_json read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw_data_error(fmt::format("cannot open {}", path.string()));
  try {
    ordered_json m = ordered_json::parse(in);
    if (m.value("order", std::string("row-major")) != "row-major") {
      throw_data_error(fmt::format("{}: only row-major order is supported", path.string()));
    }
    m.at("dim").get<std::size_t>();
    m.at("count").get<std::size_t>();
    m.at("dtype").get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw_data_error(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_manifest(const std::filesystem::path& dir, const ordered_json& m) {
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw_data_error(fmt::format("cannot write {}", (dir / "manifest.json").string()));
  out << m.dump(2) << '\n';
}

}  // namespace

void VectorTable::validate() const {
  if (ids.size() * dim != values.size()) {
    throw_data_error(fmt::format("vector table shape mismatch: {} ids x {} dims != {} values",
                                 ids.size(), dim, values.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw_data_error(fmt::format("non-finite value in vector of item {}", ids[i / dim]));
    }
  }
}

void write_vector_file(const std::filesystem::path& dir, const VectorTable& table) {
  table.validate();
  std::filesystem::create_directories(dir);
  ordered_json m;
  m["dim"] = table.dim;
  m["count"] = table.rows();
  m["dtype"] = "f32le";
  m["order"] = "row-major";
  if (!table.source.empty()) m["source"] = table.source;
  write_manifest(dir, m);
  std::ofstream out(dir / "vectors.bin", std::ios::binary | std::ios::trunc);
  if (!out) throw_data_error(fmt::format("cannot write {}", (dir / "vectors.bin").string()));
  write_le<float, std::uint32_t>(out, table.values);
  write_ids(dir / "ids.txt", table.ids);
}

VectorTable read_vector_file(const std::filesystem::path& dir) {
  const auto m = read_manifest(dir);
  if (m.at("dtype") != "f32le") {
    throw_data_error(fmt::format("{}: expected dtype f32le, found {}", dir.string(),
                                 m.at("dtype").get<std::string>()));
  }
  VectorTable table;
  table.dim = m.at("dim").get<std::size_t>();
  const auto count = m.at("count").get<std::size_t>();
  table.source = m.value("source", std::string());
  table.ids = read_ids(dir / "ids.txt");
  if (table.ids.size() != count) {
    throw_data_error(fmt::format("{}: manifest count {} but {} ids", dir.string(), count,
                                 table.ids.size()));
  }
  table.values = read_le<float, std::uint32_t>(dir / "vectors.bin", count * table.dim);
  table.validate();
  return table;
}

void write_f64_rows(const std::filesystem::path& dir, std::span<const std::string> ids,
                    std::size_t dim, std::span<const double> values,
                    std::string_view manifest_extra) {
  if (ids.size() * dim != values.size()) {
    throw_data_error("f64 row block shape mismatch");
  }
  std::filesystem::create_directories(dir);
  ordered_json m;
  m["dim"] = dim;
  m["count"] = ids.size();
  m["dtype"] = "f64le";
  m["order"] = "row-major";
  const auto extra = ordered_json::parse(manifest_extra);
  for (const auto& [k, v] : extra.items()) m[k] = v;
  write_manifest(dir, m);
  std::ofstream out(dir / "vectors.bin", std::ios::binary | std::ios::trunc);
  if (!out) throw_data_error(fmt::format("cannot write {}", (dir / "vectors.bin").string()));
  write_le<double, std::uint64_t>(out, values);
  write_ids(dir / "ids.txt", ids);
}

F64Rows read_f64_rows(const std::filesystem::path& dir) {
  const auto m = read_manifest(dir);
  if (m.at("dtype") != "f64le") {
    throw_data_error(fmt::format("{}: expected dtype f64le", dir.string()));
  }
  F64Rows rows;
  rows.dim = m.at("dim").get<std::size_t>();
  const auto count = m.at("count").get<std::size_t>();
  rows.ids = read_ids(dir / "ids.txt");
  if (rows.ids.size() != count) {
    throw_data_error(fmt::format("{}: manifest count {} but {} ids", dir.string(), count,
                                 rows.ids.size()));
  }
  rows.values = read_le<double, std::uint64_t>(dir / "vectors.bin", count * rows.dim);
  rows.manifest_json = m.dump();
  return rows;
}

}  // namespace recprompt
