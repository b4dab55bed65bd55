#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nutricast/core/adam.hpp"
#include "nutricast/core/error.hpp"
#include "nutricast/model/classifier.hpp"

namespace nutricast {

struct TrainConfig {
  Variant variant = Variant::VL;
  std::vector<std::string> nutrients{"fat"};
  double lr_head = 1e-3;
  double lr_encoders = 1e-7;
  std::size_t batch_size = 128;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  std::optional<std::size_t> patience;   // epochs without a lower mean loss
  bool allow_short_batch = true;         // train set smaller than one batch
  double split_ratio = 0.7;
  double percentile = 0.95;
  std::optional<std::size_t> k_override;
  std::size_t min_token_frequency = 2;
  std::vector<std::size_t> hidden{64, 16};
  double contrastive_weight = 0.0;       // adds clip_loss on the batch (VL only)
  double weight_decay = 0.0;
  double clip_norm = 0.0;

  void validate() const {
    if (nutrients.empty()) throw ConfigError("train: at least one nutrient channel is required");
    if (!(lr_head >= 0) || !(lr_encoders >= 0)) throw ConfigError("train: learning rates must be non-negative");
    if (batch_size == 0) throw ConfigError("train: batch_size must be at least 1");
    if (!(split_ratio > 0 && split_ratio < 1)) throw ConfigError("train: split ratio must lie in (0, 1)");
    if (!(contrastive_weight >= 0)) throw ConfigError("train: contrastive weight must be non-negative");
    if (patience && *patience == 0) throw ConfigError("train: patience must be at least 1");
  }

  AdamConfig adam() const {
    AdamConfig a;
    a.weight_decay = weight_decay;
    a.clip_norm = clip_norm;
    return a;
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"variant", to_string(c.variant)},
       {"nutrients", c.nutrients},
       {"lr_head", c.lr_head},
       {"lr_encoders", c.lr_encoders},
       {"batch_size", c.batch_size},
       {"epochs", c.epochs},
       {"seed", c.seed},
       {"patience", c.patience ? nlohmann::json(*c.patience) : nlohmann::json()},
       {"allow_short_batch", c.allow_short_batch},
       {"split_ratio", c.split_ratio},
       {"percentile", c.percentile},
       {"k_override", c.k_override ? nlohmann::json(*c.k_override) : nlohmann::json()},
       {"min_token_frequency", c.min_token_frequency},
       {"hidden", c.hidden},
       {"contrastive_weight", c.contrastive_weight},
       {"weight_decay", c.weight_decay},
       {"clip_norm", c.clip_norm}};
}

/// Missing keys keep their defaults, so partial config files are accepted.
inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  if (j.contains("variant")) c.variant = variant_from_string(j.at("variant").get<std::string>());
  if (j.contains("nutrients")) c.nutrients = j.at("nutrients").get<std::vector<std::string>>();
  c.lr_head = j.value("lr_head", c.lr_head);
  c.lr_encoders = j.value("lr_encoders", c.lr_encoders);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  if (j.contains("patience")) {
    c.patience = j["patience"].is_null() ? std::nullopt : std::optional(j["patience"].get<std::size_t>());
  }
  c.allow_short_batch = j.value("allow_short_batch", c.allow_short_batch);
  c.split_ratio = j.value("split_ratio", c.split_ratio);
  c.percentile = j.value("percentile", c.percentile);
  if (j.contains("k_override")) {
    c.k_override = j["k_override"].is_null() ? std::nullopt : std::optional(j["k_override"].get<std::size_t>());
  }
  c.min_token_frequency = j.value("min_token_frequency", c.min_token_frequency);
  if (j.contains("hidden")) c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  c.contrastive_weight = j.value("contrastive_weight", c.contrastive_weight);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
}

/// One optimizer step. `step` counts from 1 across the whole run.
struct LossRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double loss = 0.0;

  friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

}  // namespace nutricast
