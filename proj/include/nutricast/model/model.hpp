#pragma once

#include <algorithm>
#include <cstring>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nutricast/core/hash.hpp"
#include "nutricast/image/image.hpp"
#include "nutricast/model/classifier.hpp"
#include "nutricast/model/contrastive.hpp"
#include "nutricast/model/encoders.hpp"
#include "nutricast/text/tokenizer.hpp"

namespace nutricast {

inline const std::string kLogTemperature = "contrastive.log_temperature";

inline std::string head_prefix(const std::string& nutrient) { return "heads." + nutrient; }

struct Prediction {
  std::size_t cls = 0;
  std::vector<double> confidences;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Inputs for one product, already preprocessed for a model.
template <typename T>
struct ItemInput {
  std::optional<Tensor<T>> image;              // H x W x 3, standardized
  std::optional<std::vector<std::size_t>> tokens;
};

/// Shared dual encoder, learnable temperature, and one independent MLP head
/// per nutrient channel.
template <typename T>
struct NutrientModel {
  ModelConfig config;
  Variant variant = Variant::VL;
  PreprocessConfig preprocess;
  Vocabulary vocab;
  std::map<std::string, HeadConfig> heads;
  ParameterStore<T> params;

  /// Fresh model. `class_counts` maps nutrient -> number of classes (incl. class 0).
  static NutrientModel create(ModelConfig cfg, Variant variant, Vocabulary vocab,
                              const std::map<std::string, std::size_t>& class_counts, std::uint64_t seed,
                              std::vector<std::size_t> hidden = {64, 16}) {
    cfg.vocab_size = vocab.size();
    cfg.validate();
    NutrientModel m;
    m.config = cfg;
    m.variant = variant;
    m.vocab = std::move(vocab);
    Rng image_rng(derive_seed(seed, 1)), text_rng(derive_seed(seed, 2));
    init_image_encoder(m.params, image_rng, cfg);
    init_text_encoder(m.params, text_rng, cfg);
    m.params.add(kLogTemperature, Tensor<T>({1}, static_cast<T>(std::log(cfg.temperature_init))));
    std::uint64_t tag = 100;
    for (const auto& [nutrient, count] : class_counts) {
      HeadConfig h{head_input_dim(variant, cfg.projection_dim), hidden, count};
      Rng head_rng(derive_seed(seed, tag++));
      init_head(m.params, head_rng, head_prefix(nutrient), h);
      m.heads[nutrient] = h;
    }
    m.apply_freeze();
    return m;
  }

  /// Encoders (and the temperature) train only in the VL variant.
  void apply_freeze() {
    const bool frozen = encoders_frozen(variant);
    params.set_trainable("image.", !frozen);
    params.set_trainable("text.", !frozen);
    params.set_trainable("contrastive.", !frozen);
    params.set_trainable("heads.", true);
  }

  const HeadConfig& head(const std::string& nutrient) const {
    auto it = heads.find(nutrient);
    if (it == heads.end()) throw ConfigError("model has no head for nutrient '" + nutrient + "'");
    return it->second;
  }

  Tensor<T> prepare_image(const Image& img) const { return nutricast::preprocess<T>(img, config.image_resolution, preprocess); }
  std::vector<std::size_t> prepare_text(const std::string& text) const { return tokenize(text, vocab, config.context_length); }

  ItemInput<T> prepare(const Image* img, const std::string* text) const {
    ItemInput<T> in;
    if (img) in.image = prepare_image(*img);
    if (text) in.tokens = prepare_text(*text);
    return in;
  }

  Embedding<T> embed_image(const Tensor<T>& grid) const { return image_embedding(params, config, grid); }
  Embedding<T> embed_text(const std::vector<std::size_t>& ids) const { return text_embedding(params, config, ids); }

  /// Head logits for one item on an existing tape. Only the modalities the
  /// variant uses are encoded.
  template <typename B>
  Var logits(const B& bind, const std::string& nutrient, const ItemInput<T>& in, ImageTrace* itrace = nullptr,
             TextTrace* ttrace = nullptr, Var* image_emb = nullptr, Var* text_emb = nullptr) const {
    const HeadConfig& h = head(nutrient);
    std::optional<Var> iv, tv;
    if (uses_image(variant)) {
      if (!in.image) throw ContractError(to_string(variant) + " prediction needs an image");
      iv = encode_image<T>(bind, config, *in.image, itrace);
      if (image_emb) *image_emb = *iv;
    }
    if (uses_text(variant)) {
      if (!in.tokens) throw ContractError(to_string(variant) + " prediction needs an ingredient statement");
      tv = encode_text<T>(bind, config, *in.tokens, ttrace);
      if (text_emb) *text_emb = *tv;
    }
    Var x = assemble_input(bind.tape(), variant, iv, tv);
    return head_logits<T>(bind.sub(head_prefix(nutrient)), h, x, config.activation);
  }

  /// Head logits from precomputed features (frozen variants).
  template <typename B>
  Var logits_from_features(const B& bind, const std::string& nutrient, const std::vector<T>& features) const {
    Var x = bind.tape().constant(Tensor<T>({1, features.size()}, features));
    return head_logits<T>(bind.sub(head_prefix(nutrient)), head(nutrient), x, config.activation);
  }

  Prediction predict(const std::string& nutrient, const ItemInput<T>& in) const {
    Tape<T> tape;
    Binder<T, const ParameterStore<T>> bind(tape, params);
    return to_prediction(tape.value(logits(bind, nutrient, in)));
  }

  Prediction predict_from_features(const std::string& nutrient, const std::vector<T>& features) const {
    Tape<T> tape;
    Binder<T, const ParameterStore<T>> bind(tape, params);
    return to_prediction(tape.value(logits_from_features(bind, nutrient, features)));
  }

  /// Fingerprint of the encoder weights and architecture; embedding caches
  /// are keyed by it.
  std::string encoder_hash() const {
    Fnv1a h;
    const nlohmann::json cfg = config;
    h.update(cfg.dump());
    for (const auto& [name, p] : params) {
      if (!name.starts_with("image.") && !name.starts_with("text.")) continue;
      h.update(name);
      h.update(p.value.data(), p.value.size() * sizeof(T));
    }
    return h.hex();
  }

  static Prediction to_prediction(const Tensor<T>& logits) {
    const auto probs = softmax(logits.values());
    Prediction p;
    p.confidences.assign(probs.begin(), probs.end());
    p.cls = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    return p;
  }
};

}  // namespace nutricast
