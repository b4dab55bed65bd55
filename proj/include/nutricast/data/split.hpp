#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "nutricast/core/error.hpp"
#include "nutricast/core/random.hpp"
#include "nutricast/data/manifest.hpp"

namespace nutricast {

struct SplitAssignment {
  std::uint64_t seed = 0;
  double ratio = 0.7;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;

  friend bool operator==(const SplitAssignment&, const SplitAssignment&) = default;
};

inline void to_json(nlohmann::json& j, const SplitAssignment& s) {
  j = {{"seed", s.seed}, {"ratio", s.ratio}, {"train_ids", s.train_ids}, {"test_ids", s.test_ids}};
}
inline void from_json(const nlohmann::json& j, SplitAssignment& s) {
  j.at("seed").get_to(s.seed);
  j.at("ratio").get_to(s.ratio);
  j.at("train_ids").get_to(s.train_ids);
  j.at("test_ids").get_to(s.test_ids);
}

/// Seeded shuffle, then the first floor(ratio * n) ids go to training.
inline SplitAssignment split_dataset(const std::vector<FoodItem>& items, double ratio, std::uint64_t seed) {
  if (items.empty()) throw DomainError("split_dataset: no items");
  if (!(ratio > 0 && ratio < 1)) throw ConfigError("split ratio must lie in (0, 1)");
  std::vector<std::string> ids;
  ids.reserve(items.size());
  for (const auto& it : items) ids.push_back(it.id);
  Rng rng(derive_seed(seed, 0x5B117));
  rng.shuffle(ids);
  const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(ids.size()) + 1e-9));
  SplitAssignment s;
  s.seed = seed;
  s.ratio = ratio;
  s.train_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  return s;
}

/// Items of `all` whose ids are listed, in listing order.
inline std::vector<FoodItem> select_items(const std::vector<FoodItem>& all, const std::vector<std::string>& ids) {
  std::map<std::string, const FoodItem*> by_id;
  for (const auto& it : all) by_id[it.id] = &it;
  std::vector<FoodItem> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto f = by_id.find(id);
    if (f == by_id.end()) throw ContractError("split references unknown id '" + id + "'");
    out.push_back(*f->second);
  }
  return out;
}

}  // namespace nutricast
