#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nutricast/core/layers.hpp"
#include "nutricast/model/encoders.hpp"

namespace nutricast {

/// VF / LF / VLF freeze both encoders and feed image, text, or concatenated
/// features to the head. VL fine-tunes encoders and head together.
enum class Variant { VF, LF, VLF, VL };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::VF: return "VF";
    case Variant::LF: return "LF";
    case Variant::VLF: return "VLF";
    case Variant::VL: return "VL";
  }
  return "?";
}

inline Variant variant_from_string(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (s == "VF") return Variant::VF;
  if (s == "LF") return Variant::LF;
  if (s == "VLF" || s == "LVF") return Variant::VLF;
  if (s == "VL") return Variant::VL;
  throw ConfigError("unknown variant '" + s + "' (expected VF, LF, VLF or VL)");
}

inline bool uses_image(Variant v) { return v != Variant::LF; }
inline bool uses_text(Variant v) { return v != Variant::VF; }
inline bool encoders_frozen(Variant v) { return v != Variant::VL; }

inline std::size_t head_input_dim(Variant v, std::size_t projection_dim) {
  return (v == Variant::VLF || v == Variant::VL) ? 2 * projection_dim : projection_dim;
}

struct HeadConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden{64, 16};
  std::size_t class_count = 2;

  void validate() const {
    if (input_dim == 0) throw ConfigError("head input_dim must be positive");
    if (class_count < 2) throw ConfigError("a head needs at least 2 classes");
    for (auto h : hidden)
      if (h == 0) throw ConfigError("head hidden sizes must be positive");
  }

  friend bool operator==(const HeadConfig&, const HeadConfig&) = default;
};

inline void to_json(nlohmann::json& j, const HeadConfig& h) {
  j = {{"input_dim", h.input_dim}, {"hidden", h.hidden}, {"class_count", h.class_count}};
}
inline void from_json(const nlohmann::json& j, HeadConfig& h) {
  j.at("input_dim").get_to(h.input_dim);
  j.at("hidden").get_to(h.hidden);
  j.at("class_count").get_to(h.class_count);
}

/// The output layer starts at zero, so an untrained head assigns uniform
/// confidences; pass `zero_output = false` for a random output layer.
template <typename T>
void init_head(ParameterStore<T>& store, Rng& rng, const std::string& prefix, const HeadConfig& cfg,
               bool zero_output = true) {
  cfg.validate();
  std::size_t in = cfg.input_dim;
  for (std::size_t i = 0; i < cfg.hidden.size(); ++i) {
    add_linear(store, rng, prefix + ".fc" + std::to_string(i), in, cfg.hidden[i]);
    in = cfg.hidden[i];
  }
  add_linear(store, rng, prefix + ".out", in, cfg.class_count);
  if (zero_output) store.at(prefix + ".out.w").value.fill(T{0});
}

/// Head logits (1 x class_count) for a 1 x input_dim feature row.
template <typename T, typename B>
Var head_logits(const B& bind, const HeadConfig& cfg, Var x, Activation act) {
  auto& tape = bind.tape();
  if (tape.value(x).cols() != cfg.input_dim) {
    throw DimensionError("head expects input of " + std::to_string(cfg.input_dim) + ", got " +
                         std::to_string(tape.value(x).cols()));
  }
  for (std::size_t i = 0; i < cfg.hidden.size(); ++i) {
    x = activate(tape, linear<T>(bind.sub("fc" + std::to_string(i)), x), act);
  }
  return linear<T>(bind.sub("out"), x);
}

/// Builds the head input for a variant; image features come first.
template <typename T>
std::vector<T> assemble_input(Variant variant, const Embedding<T>* image, const Embedding<T>* text) {
  if (uses_image(variant) && !image) throw ContractError(to_string(variant) + " requires an image embedding");
  if (uses_text(variant) && !text) throw ContractError(to_string(variant) + " requires a text embedding");
  std::vector<T> out;
  if (uses_image(variant)) out.insert(out.end(), image->values.begin(), image->values.end());
  if (uses_text(variant)) out.insert(out.end(), text->values.begin(), text->values.end());
  return out;
}

/// Tape form of assemble_input.
template <typename T>
Var assemble_input(Tape<T>& tape, Variant variant, std::optional<Var> image, std::optional<Var> text) {
  if (uses_image(variant) && !image) throw ContractError(to_string(variant) + " requires an image embedding");
  if (uses_text(variant) && !text) throw ContractError(to_string(variant) + " requires a text embedding");
  if (variant == Variant::VF) return *image;
  if (variant == Variant::LF) return *text;
  return ad::concat_cols(tape, {*image, *text});
}

/// Class confidences (softmax of the head logits) for one feature vector.
template <typename T>
std::vector<T> mlp_forward(const ParameterStore<T>& store, const std::string& prefix, const HeadConfig& cfg,
                           const std::vector<T>& x, Activation act = Activation::Gelu) {
  if (x.size() != cfg.input_dim) {
    throw DimensionError("head expects input of " + std::to_string(cfg.input_dim) + ", got " + std::to_string(x.size()));
  }
  Tape<T> tape;
  Binder<T, const ParameterStore<T>> bind(tape, store, prefix + ".");
  Var in = tape.constant(Tensor<T>({1, x.size()}, x));
  const auto& logits = tape.value(head_logits<T>(bind, cfg, in, act));
  return softmax(logits.values());
}

/// -log(confidence of the true class).
template <typename T>
double cross_entropy(const std::vector<T>& confidences, std::size_t true_class) {
  if (true_class >= confidences.size()) {
    throw DomainError("class " + std::to_string(true_class) + " out of range for " +
                      std::to_string(confidences.size()) + " classes");
  }
  return -std::log(static_cast<double>(confidences[true_class]));
}

/// Batched form: mean of per-sample cross-entropy.
template <typename T>
double cross_entropy(const std::vector<std::vector<T>>& confidences, const std::vector<std::size_t>& classes) {
  if (confidences.size() != classes.size() || confidences.empty()) throw DimensionError("cross_entropy: batch mismatch");
  double total = 0;
  for (std::size_t i = 0; i < classes.size(); ++i) total += cross_entropy(confidences[i], classes[i]);
  return total / static_cast<double>(classes.size());
}

}  // namespace nutricast
