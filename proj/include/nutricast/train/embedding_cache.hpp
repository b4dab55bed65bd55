#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nutricast/core/error.hpp"
#include "nutricast/model/model.hpp"
#include "nutricast/train/dataset.hpp"

namespace nutricast {

/// Frozen-encoder embeddings keyed by item id.
template <typename T>
struct EmbeddingCache {
  struct Entry {
    std::optional<std::vector<T>> image;
    std::optional<std::vector<T>> text;
  };

  std::string encoder_hash;
  Variant variant = Variant::VF;
  std::map<std::string, Entry> entries;

  std::size_t size() const noexcept { return entries.size(); }

  /// Throws StaleCacheError unless `model` has the encoders this cache was built from.
  void check(const NutrientModel<T>& model) const {
    if (model.encoder_hash() != encoder_hash) {
      throw StaleCacheError("embedding cache was built with encoder " + encoder_hash + ", model has " +
                            model.encoder_hash());
    }
    if (model.variant != variant) {
      throw StaleCacheError("embedding cache was built for " + to_string(variant) + ", model is " +
                            to_string(model.variant));
    }
  }

  const Entry& at(const std::string& id) const {
    auto it = entries.find(id);
    if (it == entries.end()) throw ContractError("embedding cache has no entry for '" + id + "'");
    return it->second;
  }

  /// The head input for `id`, assembled per the variant.
  std::vector<T> features(const std::string& id) const {
    const Entry& e = at(id);
    std::vector<T> out;
    if (uses_image(variant)) out.insert(out.end(), e.image->begin(), e.image->end());
    if (uses_text(variant)) out.insert(out.end(), e.text->begin(), e.text->end());
    return out;
  }
};

template <typename T>
EmbeddingCache<T> precompute_embeddings(const NutrientModel<T>& model, const std::vector<Example<T>>& examples) {
  if (!encoders_frozen(model.variant)) {
    throw ContractError("embedding cache is only valid for frozen-encoder variants, not " + to_string(model.variant));
  }
  EmbeddingCache<T> cache;
  cache.encoder_hash = model.encoder_hash();
  cache.variant = model.variant;
  for (const auto& ex : examples) {
    typename EmbeddingCache<T>::Entry e;
    if (uses_image(model.variant)) {
      if (!ex.input.image) throw ContractError("item '" + ex.id + "' has no image");
      e.image = model.embed_image(*ex.input.image).values;
    }
    if (uses_text(model.variant)) {
      if (!ex.input.tokens) throw ContractError("item '" + ex.id + "' has no ingredient tokens");
      e.text = model.embed_text(*ex.input.tokens).values;
    }
    cache.entries[ex.id] = std::move(e);
  }
  return cache;
}

}  // namespace nutricast
