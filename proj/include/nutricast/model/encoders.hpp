#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nutricast/core/layers.hpp"
#include "nutricast/image/image.hpp"
#include "nutricast/model/config.hpp"
#include "nutricast/text/tokenizer.hpp"

namespace nutricast {

enum class Modality { Image, Text };

inline std::string to_string(Modality m) { return m == Modality::Image ? "image" : "text"; }

/// Encoder output of length projection_dim.
template <typename T>
struct Embedding {
  std::vector<T> values;
  Modality modality = Modality::Image;

  std::size_t dim() const noexcept { return values.size(); }
  friend bool operator==(const Embedding&, const Embedding&) = default;
};

/// Nodes recorded during an image forward pass.
struct ImageTrace {
  Var patches;        // raw patch rows
  Var last_block_in;  // ln1 output of the final block: (1 + patches) x width
};

/// Nodes recorded during a text forward pass.
struct TextTrace {
  Var token_embeddings;  // context_length x width, before position embeddings
  std::size_t eos = 0;
  std::vector<Var> last_attention;  // per head, final block
};

template <typename T>
void init_image_encoder(ParameterStore<T>& store, Rng& rng, const ModelConfig& cfg) {
  const std::size_t w = cfg.image_width;
  store.add("image.patch_proj.w", fan_in_normal<T>(rng, cfg.patch_length(), w));
  store.add("image.class_emb", normal_tensor<T>(rng, {w}, 1.0 / std::sqrt(static_cast<double>(w))));
  store.add("image.pos_emb", normal_tensor<T>(rng, {cfg.patch_count() + 1, w}, 1.0 / std::sqrt(static_cast<double>(w))));
  add_layer_norm(store, "image.ln_pre", w);
  for (std::size_t l = 0; l < cfg.image_layers; ++l) {
    add_transformer_block(store, rng, "image.blocks." + std::to_string(l), w, w * cfg.mlp_ratio);
  }
  store.add("image.proj", fan_in_normal<T>(rng, w, cfg.projection_dim));
}

template <typename T>
void init_text_encoder(ParameterStore<T>& store, Rng& rng, const ModelConfig& cfg) {
  const std::size_t w = cfg.text_width;
  store.add("text.token_emb", normal_tensor<T>(rng, {cfg.vocab_size, w}, 0.02));
  store.add("text.pos_emb", normal_tensor<T>(rng, {cfg.context_length, w}, 0.01));
  for (std::size_t l = 0; l < cfg.text_layers; ++l) {
    add_transformer_block(store, rng, "text.blocks." + std::to_string(l), w, w * cfg.mlp_ratio);
  }
  add_layer_norm(store, "text.ln_final", w);
  store.add("text.proj", fan_in_normal<T>(rng, w, cfg.projection_dim));
}

/// Image encoder on a preprocessed H x W x 3 grid. Returns a 1 x projection_dim node.
///
/// patchify -> linear patch projection -> prepend class token -> add position
/// embeddings -> layer norm -> residual blocks -> class-token row -> projection.
template <typename T, typename B>
Var encode_image(const B& bind, const ModelConfig& cfg, const Tensor<T>& grid, ImageTrace* trace = nullptr) {
  if (grid.rank() != 3 || grid.shape()[0] != cfg.image_resolution || grid.shape()[1] != cfg.image_resolution) {
    throw ContractError("encode_image expects a preprocessed " + std::to_string(cfg.image_resolution) + "x" +
                        std::to_string(cfg.image_resolution) + "x3 grid, got " + shape_string(grid.shape()));
  }
  auto& tape = bind.tape();
  Var patches = tape.mode() == GradMode::All ? tape.watch(patchify(grid, cfg.patch_size))
                                             : tape.constant(patchify(grid, cfg.patch_size));
  if (trace) trace->patches = patches;
  Var x = ad::matmul(tape, patches, bind("image.patch_proj.w"));
  x = ad::concat_rows(tape, {bind("image.class_emb"), x});
  x = ad::add(tape, x, bind("image.pos_emb"));
  x = layer_norm<T>(bind.sub("image.ln_pre"), x, cfg.layer_norm_eps);
  for (std::size_t l = 0; l < cfg.image_layers; ++l) {
    Var normed;
    x = transformer_block<T>(bind.sub("image.blocks." + std::to_string(l)), x, cfg.image_heads, cfg.activation,
                             nullptr, &normed, cfg.layer_norm_eps);
    if (trace && l + 1 == cfg.image_layers) trace->last_block_in = normed;
  }
  Var cls = ad::slice_rows(tape, x, 0, 1);
  return ad::matmul(tape, cls, bind("image.proj"));
}

/// Text encoder over a full-length token sequence. PAD keys are masked from
/// every attention softmax so padding never reaches the EOS features.
template <typename T, typename B>
Var encode_text(const B& bind, const ModelConfig& cfg, const std::vector<std::size_t>& ids, TextTrace* trace = nullptr) {
  if (ids.size() != cfg.context_length) {
    throw ContractError("encode_text expects " + std::to_string(cfg.context_length) + " tokens, got " +
                        std::to_string(ids.size()));
  }
  for (auto id : ids) {
    if (id >= cfg.vocab_size) {
      throw DomainError("token id " + std::to_string(id) + " >= vocab_size " + std::to_string(cfg.vocab_size));
    }
  }
  auto& tape = bind.tape();
  const std::size_t eos = eos_position(ids);
  std::vector<bool> mask(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) mask[i] = ids[i] != Vocabulary::kPad;
  Var tokens = ad::gather_rows(tape, bind("text.token_emb"), ids);
  if (trace) {
    trace->token_embeddings = tokens;
    trace->eos = eos;
  }
  Var x = ad::add(tape, tokens, bind("text.pos_emb"));
  for (std::size_t l = 0; l < cfg.text_layers; ++l) {
    const bool last = trace && l + 1 == cfg.text_layers;
    x = transformer_block<T>(bind.sub("text.blocks." + std::to_string(l)), x, cfg.text_heads, cfg.activation, &mask,
                             nullptr, cfg.layer_norm_eps, last ? &trace->last_attention : nullptr);
  }
  x = layer_norm<T>(bind.sub("text.ln_final"), x, cfg.layer_norm_eps);
  return ad::matmul(tape, ad::slice_rows(tape, x, eos, 1), bind("text.proj"));
}

template <typename T>
Embedding<T> image_embedding(const ParameterStore<T>& store, const ModelConfig& cfg, const Tensor<T>& grid) {
  Tape<T> tape;
  Binder<T, const ParameterStore<T>> bind(tape, store);
  const auto& v = tape.value(encode_image<T>(bind, cfg, grid));
  return {std::vector<T>(v.values().begin(), v.values().end()), Modality::Image};
}

template <typename T>
Embedding<T> text_embedding(const ParameterStore<T>& store, const ModelConfig& cfg, const std::vector<std::size_t>& ids) {
  Tape<T> tape;
  Binder<T, const ParameterStore<T>> bind(tape, store);
  const auto& v = tape.value(encode_text<T>(bind, cfg, ids));
  return {std::vector<T>(v.values().begin(), v.values().end()), Modality::Text};
}

}  // namespace nutricast
