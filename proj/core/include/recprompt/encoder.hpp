#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "recprompt/corpus.hpp"
#include "recprompt/http.hpp"
#include "recprompt/vectors.hpp"

namespace recprompt {

inline constexpr std::string_view kDescriptionTemplateVersion = "desc-v1";

struct ItemDescription {
  std::string item_id;
  std::string text;
};

// One paragraph: a title sentence, then "The <field> is <value>." for each
// present attribute in a fixed per-dataset order. Absent or empty
// attributes are skipped.
ItemDescription render_item_description(const ItemRecord& item, DatasetKind kind);

std::vector<ItemDescription> render_item_descriptions(std::span<const ItemRecord> catalog,
                                                      DatasetKind kind);

// Supplies raw D-dimensional embeddings, one per description, in order.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::string id() const = 0;
  virtual VectorTable embed(std::span<const ItemDescription> descriptions) = 0;
};

// Validates the backend output (one finite row per description, ids in
// input order, consistent D) and returns it.
VectorTable acquire_embeddings(std::span<const ItemDescription> descriptions,
                               EmbeddingBackend& backend);

enum class BuiltinMode { kGenreIndicator, kSeededHash };

struct BuiltinParams {
  // Normalized genre tokens; one dimension each (genre-indicator mode).
  std::vector<std::string> genre_vocabulary;
  std::size_t hash_dim = 64;
  std::uint64_t seed = 0;
};

// Sorted normalized genre tokens across the catalog.
std::vector<std::string> genre_vocabulary(std::span<const ItemRecord> catalog);

// Genre-indicator: unit-norm 0/1 indicator over the vocabulary.
// Seeded-hash: components in [-1, 1] from a hash of (item id, component, seed).
std::vector<float> builtin_embed(const ItemRecord& item, BuiltinMode mode,
                                 const BuiltinParams& params);

class BuiltinBackend final : public EmbeddingBackend {
 public:
  // Genre-indicator mode builds its vocabulary from the catalog when the
  // params leave it empty.
  BuiltinBackend(std::span<const ItemRecord> catalog, BuiltinMode mode, BuiltinParams params);

  std::string id() const override;
  VectorTable embed(std::span<const ItemDescription> descriptions) override;

 private:
  std::vector<const ItemRecord*> lookup(std::span<const ItemDescription> descriptions) const;

  std::span<const ItemRecord> catalog_;
  BuiltinMode mode_;
  BuiltinParams params_;
};

// Reads a vector file and reorders it to the requested ids. Every requested
// id must be present.
class FileBackend final : public EmbeddingBackend {
 public:
  explicit FileBackend(std::filesystem::path dir);

  std::string id() const override;
  VectorTable embed(std::span<const ItemDescription> descriptions) override;

 private:
  std::filesystem::path dir_;
};

struct ServiceConfig {
  std::string endpoint;  // full URL of the embeddings route
  std::string model;
  std::string api_key_env;  // empty: no Authorization header
  std::size_t batch_size = 16;
  std::size_t max_in_flight = 4;
  std::chrono::milliseconds timeout{60000};
  RetryPolicy retry;
};

// Embeddings-endpoint client: request {model, input: [texts]}, response
// {data: [{index, embedding}]}. A failed batch fails the whole call.
class ServiceBackend final : public EmbeddingBackend {
 public:
  ServiceBackend(ServiceConfig config, std::shared_ptr<HttpTransport> transport);

  std::string id() const override;
  VectorTable embed(std::span<const ItemDescription> descriptions) override;

  const RequestCounters& counters() const noexcept { return counters_; }

 private:
  std::vector<std::vector<float>> embed_batch(std::span<const ItemDescription> batch);

  ServiceConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  Headers headers_;
  RequestCounters counters_;
};

}  // namespace recprompt
