#pragma once

#include <map>
#include <string>
#include <vector>

#include "nutricast/data/binning.hpp"
#include "nutricast/data/manifest.hpp"
#include "nutricast/model/model.hpp"

namespace nutricast {

/// A preprocessed item with its class label per nutrient (kExcluded when the
/// value is missing or above the outlier threshold).
template <typename T>
struct Example {
  std::string id;
  ItemInput<T> input;
  std::map<std::string, int> labels;
};

/// Fits one binning spec per nutrient on `items` (normally the training split).
inline std::map<std::string, BinningSpec> fit_binning(const std::vector<FoodItem>& items,
                                                      const std::vector<std::string>& nutrients, double percentile,
                                                      std::optional<std::size_t> k_override) {
  std::map<std::string, BinningSpec> out;
  for (const auto& nutrient : nutrients) {
    std::vector<double> values;
    std::string unit;
    for (const auto& item : items) {
      auto it = item.nutrients.find(nutrient);
      if (it == item.nutrients.end()) continue;
      values.push_back(it->second.value);
      unit = it->second.unit;
    }
    if (values.empty()) throw ConfigError("no training item carries nutrient '" + nutrient + "'");
    BinningSpec spec = bin_nutrient(values, k_override, percentile, nutrient).spec;
    spec.unit = unit;
    out[nutrient] = std::move(spec);
  }
  return out;
}

inline int label_of(const FoodItem& item, const BinningSpec& spec) {
  auto it = item.nutrients.find(spec.nutrient);
  if (it == item.nutrients.end()) return kExcluded;
  return spec.label_for(it->second.value);
}

/// Loads and preprocesses the modalities the model's variant needs.
template <typename T>
std::vector<Example<T>> prepare_examples(const NutrientModel<T>& model, const Manifest& manifest,
                                         const std::vector<FoodItem>& items,
                                         const std::map<std::string, BinningSpec>& bins) {
  std::vector<Example<T>> out;
  out.reserve(items.size());
  for (const auto& item : items) {
    Example<T> ex;
    ex.id = item.id;
    if (uses_image(model.variant)) ex.input.image = model.prepare_image(read_image(manifest.image_path(item).string()));
    if (uses_text(model.variant)) ex.input.tokens = model.prepare_text(item.ingredients);
    for (const auto& [nutrient, spec] : bins) ex.labels[nutrient] = label_of(item, spec);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace nutricast
