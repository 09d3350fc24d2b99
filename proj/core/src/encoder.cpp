#include "recprompt/encoder.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <nlohmann/json.hpp>
#include <set>
#include <unordered_map>

#include "recprompt/error.hpp"
#include "recprompt/text.hpp"

namespace recprompt {
namespace {

struct FieldLabel {
  std::string_view attribute;
  std::string_view label;
};

constexpr FieldLabel kBookFields[] = {
    {"author", "author"},
    {"year", "publication year"},
    {"publisher", "publisher"},
};

std::string join(std::span<const std::string> parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

ItemDescription render_item_description(const ItemRecord& item, DatasetKind kind) {
  std::string text;
  switch (kind) {
    case DatasetKind::kMovieLens1M:
    case DatasetKind::kMovieLens25M:
      text = fmt::format("The movie title is \"{}\".", item.title);
      if (!item.genres.empty()) {
        text += fmt::format(" The genre is {}.", join(item.genres, ", "));
      }
      break;
    case DatasetKind::kBookCrossing:
      text = fmt::format("The book title is \"{}\".", item.title);
      for (const auto& field : kBookFields) {
        const auto* value = item.attribute(field.attribute);
        if (value == nullptr) continue;
        const auto v = text::trim(*value);
        // BookCrossing encodes an unknown year as 0.
        if (v.empty() || (field.attribute == "year" && v == "0")) continue;
        text += fmt::format(" The {} is {}.", field.label, v);
      }
      break;
  }
  return {item.item_id, std::move(text)};
}

std::vector<ItemDescription> render_item_descriptions(std::span<const ItemRecord> catalog,
                                                      DatasetKind kind) {
  std::vector<ItemDescription> out;
  out.reserve(catalog.size());
  for (const auto& item : catalog) out.push_back(render_item_description(item, kind));
  return out;
}

VectorTable acquire_embeddings(std::span<const ItemDescription> descriptions,
                               EmbeddingBackend& backend) {
  auto table = backend.embed(descriptions);
  if (table.rows() != descriptions.size()) {
    throw_data_error(fmt::format("backend {} returned {} vectors for {} descriptions",
                                 backend.id(), table.rows(), descriptions.size()));
  }
  for (std::size_t i = 0; i < descriptions.size(); ++i) {
    if (table.ids[i] != descriptions[i].item_id) {
      throw_data_error(fmt::format("backend {} returned vectors out of order at row {}",
                                   backend.id(), i));
    }
  }
  if (!descriptions.empty() && table.dim == 0) {
    throw_data_error(fmt::format("backend {} returned zero-dimensional vectors", backend.id()));
  }
  table.validate();
  if (table.source.empty()) table.source = backend.id();
  return table;
}

std::vector<std::string> genre_vocabulary(std::span<const ItemRecord> catalog) {
  std::set<std::string> vocab;
  for (const auto& item : catalog) {
    for (const auto& g : item.genres) vocab.insert(normalize_genre(g));
  }
  return {vocab.begin(), vocab.end()};
}

std::vector<float> builtin_embed(const ItemRecord& item, BuiltinMode mode,
                                 const BuiltinParams& params) {
  if (mode == BuiltinMode::kGenreIndicator) {
    if (params.genre_vocabulary.empty()) {
      throw_config_error("genre-indicator embedding needs a genre vocabulary");
    }
    if (item.genres.empty()) {
      throw_data_error(
          fmt::format("item {} has no genres; genre-indicator embedding is undefined",
                      item.item_id));
    }
    std::vector<float> v(params.genre_vocabulary.size(), 0.0F);
    std::size_t hits = 0;
    for (const auto& g : item.genres) {
      const auto key = normalize_genre(g);
      const auto it = std::lower_bound(params.genre_vocabulary.begin(),
                                       params.genre_vocabulary.end(), key);
      if (it == params.genre_vocabulary.end() || *it != key) {
        throw_data_error(fmt::format("genre '{}' of item {} is not in the vocabulary", g,
                                     item.item_id));
      }
      auto& slot = v[static_cast<std::size_t>(it - params.genre_vocabulary.begin())];
      if (slot == 0.0F) ++hits;
      slot = 1.0F;
    }
    const auto norm = static_cast<float>(1.0 / std::sqrt(static_cast<double>(hits)));
    for (auto& x : v) x *= norm;
    return v;
  }

  if (params.hash_dim == 0) throw_config_error("seeded-hash embedding needs hash_dim > 0");
  std::vector<float> v(params.hash_dim);
  const auto base = text::hash_string(item.item_id, params.seed);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto h = text::mix64(base ^ text::mix64(i + 1));
    // Top 24 bits give an exactly representable float in [0, 1].
    const double unit = static_cast<double>(h >> 40) / static_cast<double>((1u << 24) - 1);
    v[i] = static_cast<float>(2.0 * unit - 1.0);
  }
  return v;
}

BuiltinBackend::BuiltinBackend(std::span<const ItemRecord> catalog, BuiltinMode mode,
                               BuiltinParams params)
    : catalog_(catalog), mode_(mode), params_(std::move(params)) {
  if (mode_ == BuiltinMode::kGenreIndicator && params_.genre_vocabulary.empty()) {
    params_.genre_vocabulary = genre_vocabulary(catalog_);
  }
  std::sort(params_.genre_vocabulary.begin(), params_.genre_vocabulary.end());
}

std::string BuiltinBackend::id() const {
  if (mode_ == BuiltinMode::kGenreIndicator) {
    return fmt::format("builtin:genre:{}", params_.genre_vocabulary.size());
  }
  return fmt::format("builtin:hash:{}:{}", params_.hash_dim, params_.seed);
}

std::vector<const ItemRecord*> BuiltinBackend::lookup(
    std::span<const ItemDescription> descriptions) const {
  std::unordered_map<std::string_view, const ItemRecord*> index;
  index.reserve(catalog_.size());
  for (const auto& item : catalog_) index.emplace(item.item_id, &item);
  std::vector<const ItemRecord*> out;
  out.reserve(descriptions.size());
  for (const auto& d : descriptions) {
    const auto it = index.find(d.item_id);
    if (it == index.end()) {
      throw_data_error(fmt::format("item {} is not in the builtin backend's catalog", d.item_id));
    }
    out.push_back(it->second);
  }
  return out;
}

VectorTable BuiltinBackend::embed(std::span<const ItemDescription> descriptions) {
  const auto items = lookup(descriptions);
  VectorTable table;
  table.source = id();
  table.dim = mode_ == BuiltinMode::kGenreIndicator ? params_.genre_vocabulary.size()
                                                    : params_.hash_dim;
  table.ids.reserve(items.size());
  table.values.reserve(items.size() * table.dim);
  for (const auto* item : items) {
    const auto v = builtin_embed(*item, mode_, params_);
    table.ids.push_back(item->item_id);
    table.values.insert(table.values.end(), v.begin(), v.end());
  }
  return table;
}

FileBackend::FileBackend(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::string FileBackend::id() const { return fmt::format("file:{}", dir_.string()); }

VectorTable FileBackend::embed(std::span<const ItemDescription> descriptions) {
  const auto stored = read_vector_file(dir_);
  std::unordered_map<std::string_view, std::size_t> index;
  index.reserve(stored.rows());
  for (std::size_t i = 0; i < stored.rows(); ++i) index.emplace(stored.ids[i], i);

  std::vector<std::string_view> missing;
  for (const auto& d : descriptions) {
    if (!index.contains(d.item_id)) missing.push_back(d.item_id);
  }
  if (!missing.empty()) {
    throw_data_error(fmt::format("vector file {} covers {} of {} items (first missing: {})",
                                 dir_.string(), descriptions.size() - missing.size(),
                                 descriptions.size(), missing.front()));
  }
  VectorTable table;
  table.source = stored.source.empty() ? id() : stored.source;
  table.dim = stored.dim;
  table.ids.reserve(descriptions.size());
  table.values.reserve(descriptions.size() * stored.dim);
  for (const auto& d : descriptions) {
    const auto row = stored.row(index.at(d.item_id));
    table.ids.push_back(d.item_id);
    table.values.insert(table.values.end(), row.begin(), row.end());
  }
  return table;
}

ServiceBackend::ServiceBackend(ServiceConfig config, std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      headers_(json_headers_with_bearer(config_.api_key_env)) {
  if (config_.endpoint.empty()) throw_config_error("embedding service endpoint is empty");
  if (config_.batch_size == 0) throw_config_error("batch size must be positive");
  if (!transport_) transport_ = make_http_transport();
}

std::string ServiceBackend::id() const {
  return fmt::format("service:{}", config_.model.empty() ? config_.endpoint : config_.model);
}

std::vector<std::vector<float>> ServiceBackend::embed_batch(
    std::span<const ItemDescription> batch) {
  nlohmann::json request;
  request["model"] = config_.model;
  request["input"] = nlohmann::json::array();
  for (const auto& d : batch) request["input"].push_back(d.text);

  const auto response = post_with_retries(*transport_, config_.endpoint, request.dump(),
                                          headers_, config_.timeout, config_.retry,
                                          &counters_);
  std::vector<std::vector<float>> rows(batch.size());
  std::vector<bool> filled(batch.size(), false);
  try {
    const auto j = nlohmann::json::parse(response.body);
    const auto& data = j.at("data");
    if (data.size() != batch.size()) {
      throw_service_error(fmt::format("embedding service returned {} rows for {} inputs",
                                      data.size(), batch.size()));
    }
    for (std::size_t k = 0; k < data.size(); ++k) {
      const auto& entry = data[k];
      const auto index = entry.contains("index") ? entry.at("index").get<std::size_t>() : k;
      if (index >= batch.size() || filled[index]) {
        throw_service_error(fmt::format("embedding service returned bad index {}", index));
      }
      rows[index] = entry.at("embedding").get<std::vector<float>>();
      filled[index] = true;
    }
  } catch (const nlohmann::json::exception& e) {
    throw_service_error(fmt::format("malformed embedding response: {}", e.what()));
  }
  return rows;
}

VectorTable ServiceBackend::embed(std::span<const ItemDescription> descriptions) {
  const std::size_t n_batches =
      (descriptions.size() + config_.batch_size - 1) / config_.batch_size;
  std::vector<std::vector<std::vector<float>>> results(n_batches);
  parallel_for(n_batches, config_.max_in_flight, [&](std::size_t b) {
    const auto begin = b * config_.batch_size;
    const auto len = std::min(config_.batch_size, descriptions.size() - begin);
    results[b] = embed_batch(descriptions.subspan(begin, len));
  });

  VectorTable table;
  table.source = id();
  table.ids.reserve(descriptions.size());
  for (std::size_t b = 0; b < n_batches; ++b) {
    for (auto& row : results[b]) {
      if (table.ids.empty()) {
        table.dim = row.size();
      } else if (row.size() != table.dim) {
        throw_service_error(fmt::format("embedding dimension mismatch: {} vs {}", row.size(),
                                        table.dim));
      }
      table.ids.push_back(descriptions[table.ids.size()].item_id);
      table.values.insert(table.values.end(), row.begin(), row.end());
    }
  }
  return table;
}

}  // namespace recprompt
