#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nutricast/core/adam.hpp"
#include "nutricast/core/random.hpp"
#include "nutricast/data/split.hpp"
#include "nutricast/model/contrastive.hpp"
#include "nutricast/train/checkpoint.hpp"
#include "nutricast/train/dataset.hpp"
#include "nutricast/train/embedding_cache.hpp"

namespace nutricast {

struct TrainHooks {
  std::function<void(const LossRecord&)> on_step;
  std::function<void(std::size_t epoch, double mean_loss)> on_epoch;
};

namespace detail {

/// Batch loss for frozen variants: heads only, on cached features.
template <typename T>
Var frozen_batch_loss(Tape<T>& tape, ParameterStore<T>& params, const NutrientModel<T>& model,
                      const EmbeddingCache<T>& cache, const std::vector<const Example<T>*>& batch,
                      const std::vector<std::string>& nutrients) {
  Binder<T, ParameterStore<T>> bind(tape, params);
  std::vector<Var> terms;
  for (const auto& nutrient : nutrients) {
    std::vector<T> rows;
    std::vector<std::size_t> targets;
    std::size_t dim = 0;
    for (const auto* ex : batch) {
      const int label = ex->labels.at(nutrient);
      if (label == kExcluded) continue;
      auto f = cache.features(ex->id);
      dim = f.size();
      rows.insert(rows.end(), f.begin(), f.end());
      targets.push_back(static_cast<std::size_t>(label));
    }
    if (targets.empty()) continue;
    Var x = tape.constant(Tensor<T>({targets.size(), dim}, std::move(rows)));
    Var logits = head_logits<T>(bind.sub(head_prefix(nutrient)), model.head(nutrient), x, model.config.activation);
    terms.push_back(ad::softmax_cross_entropy(tape, logits, targets));
  }
  return terms.empty() ? Var{} : ad::weighted_sum(tape, terms);
}

/// Batch loss for VL: both encoders run on the tape.
template <typename T>
Var joint_batch_loss(Tape<T>& tape, ParameterStore<T>& params, const NutrientModel<T>& model,
                     const std::vector<const Example<T>*>& batch, const std::vector<std::string>& nutrients,
                     double contrastive_weight) {
  Binder<T, ParameterStore<T>> bind(tape, params);
  std::vector<Var> image_rows, text_rows;
  for (const auto* ex : batch) {
    if (!ex->input.image || !ex->input.tokens) throw ContractError("VL training item '" + ex->id + "' lacks a modality");
    image_rows.push_back(encode_image<T>(bind, model.config, *ex->input.image));
    text_rows.push_back(encode_text<T>(bind, model.config, *ex->input.tokens));
  }
  Var images = ad::concat_rows(tape, image_rows);
  Var texts = ad::concat_rows(tape, text_rows);
  Var features = ad::concat_cols(tape, {images, texts});
  std::vector<Var> terms;
  for (const auto& nutrient : nutrients) {
    std::vector<std::size_t> rows, targets;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const int label = batch[i]->labels.at(nutrient);
      if (label == kExcluded) continue;
      rows.push_back(i);
      targets.push_back(static_cast<std::size_t>(label));
    }
    if (rows.empty()) continue;
    Var x = ad::gather_rows(tape, features, rows);
    Var logits = head_logits<T>(bind.sub(head_prefix(nutrient)), model.head(nutrient), x, model.config.activation);
    terms.push_back(ad::softmax_cross_entropy(tape, logits, targets));
  }
  if (contrastive_weight > 0 && batch.size() >= 2) {
    const auto& cfg = model.config;
    Var inv_tau = ad::inverse_temperature(tape, bind(kLogTemperature), cfg.temperature_min, cfg.temperature_max);
    terms.push_back(ad::scale(tape, clip_loss(tape, images, texts, inv_tau), contrastive_weight));
  }
  return terms.empty() ? Var{} : ad::weighted_sum(tape, terms);
}

}  // namespace detail

/// Trains `model` in place on `examples` and returns the per-step loss
/// history. Frozen variants train the heads on precomputed embeddings; VL
/// updates encoders at lr_encoders and heads at lr_head in the same Adam step.
template <typename T>
std::vector<LossRecord> fit(NutrientModel<T>& model, const std::vector<Example<T>>& examples, const TrainConfig& cfg,
                            const TrainHooks& hooks = {}) {
  cfg.validate();
  if (examples.empty()) throw TrainingError("no training examples");
  if (examples.size() < cfg.batch_size && !cfg.allow_short_batch) {
    throw TrainingError("training set has " + std::to_string(examples.size()) + " items, fewer than one batch of " +
                        std::to_string(cfg.batch_size));
  }
  for (const auto& nutrient : cfg.nutrients) model.head(nutrient);
  model.apply_freeze();

  std::optional<EmbeddingCache<T>> cache;
  if (encoders_frozen(model.variant)) cache = precompute_embeddings(model, examples);

  Adam<T> adam(cfg.lr_head, cfg.adam());
  adam.set_group_lr("heads.", cfg.lr_head);
  adam.set_group_lr("image.", cfg.lr_encoders);
  adam.set_group_lr("text.", cfg.lr_encoders);
  adam.set_group_lr("contrastive.", cfg.lr_encoders);

  std::vector<const Example<T>*> order;
  for (const auto& ex : examples) order.push_back(&ex);
  Rng rng(derive_seed(cfg.seed, 0xB47C));

  std::vector<LossRecord> history;
  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0, step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_sum = 0;
    std::size_t epoch_steps = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<const Example<T>*> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
      ++step;
      model.params.zero_grad();
      Tape<T> tape;
      Var loss = cache ? detail::frozen_batch_loss(tape, model.params, model, *cache, batch, cfg.nutrients)
                       : detail::joint_batch_loss(tape, model.params, model, batch, cfg.nutrients,
                                                  cfg.contrastive_weight);
      LossRecord rec{epoch, step, 0.0};
      if (loss.valid()) {
        rec.loss = static_cast<double>(tape.value(loss)[0]);
        if (!std::isfinite(rec.loss)) {
          std::ostringstream oss;
          oss << "loss became " << rec.loss << " at epoch " << epoch << ", step " << step
              << "; try a lower learning rate or gradient clipping";
          throw TrainingError(oss.str());
        }
        tape.backward(loss);
        adam.step(model.params);
      }
      history.push_back(rec);
      epoch_sum += rec.loss;
      ++epoch_steps;
      if (hooks.on_step) hooks.on_step(rec);
    }
    const double mean = epoch_sum / static_cast<double>(epoch_steps);
    if (hooks.on_epoch) hooks.on_epoch(epoch, mean);
    if (cfg.patience) {
      if (mean < best) {
        best = mean;
        stale = 0;
      } else if (++stale >= *cfg.patience) {
        break;
      }
    }
  }
  model.params.zero_grad();
  return history;
}

/// Builds a fresh model for a manifest: split, per-nutrient binning and
/// vocabulary on the training split only.
template <typename T>
Checkpoint<T> initialize(const Manifest& manifest, const ModelConfig& model_cfg, const TrainConfig& cfg) {
  cfg.validate();
  Checkpoint<T> c;
  c.train = cfg;
  c.split = split_dataset(manifest.items, cfg.split_ratio, cfg.seed);
  const auto train_items = select_items(manifest.items, c.split.train_ids);
  c.bins = fit_binning(train_items, cfg.nutrients, cfg.percentile, cfg.k_override);
  std::vector<std::string> texts;
  for (const auto& item : train_items) texts.push_back(item.ingredients);
  std::map<std::string, std::size_t> class_counts;
  for (const auto& [name, spec] : c.bins) {
    if (spec.total_classes() < 2) {
      throw ConfigError("nutrient '" + name + "' has a single class on the training split; nothing to learn");
    }
    class_counts[name] = spec.total_classes();
  }
  c.model = NutrientModel<T>::create(model_cfg, cfg.variant, Vocabulary::build(texts, cfg.min_token_frequency),
                                     class_counts, cfg.seed, cfg.hidden);
  return c;
}

template <typename T>
Checkpoint<T> train(const Manifest& manifest, const ModelConfig& model_cfg, const TrainConfig& cfg,
                    const TrainHooks& hooks = {}) {
  Checkpoint<T> c = initialize<T>(manifest, model_cfg, cfg);
  const auto examples =
      prepare_examples(c.model, manifest, select_items(manifest.items, c.split.train_ids), c.bins);
  c.history = fit(c.model, examples, cfg, hooks);
  return c;
}

}  // namespace nutricast
