#pragma once

#include <string>

#include <json.hpp>

#include "nutricast/core/error.hpp"
#include "nutricast/core/layers.hpp"

namespace nutricast {

/// Architecture hyperparameters for both encoders. Defaults are the full
/// ViT-B/32-style profile; `tiny()` is the desk-scale preset.
struct ModelConfig {
  std::size_t image_resolution = 224;
  std::size_t patch_size = 32;
  std::size_t image_layers = 12;
  std::size_t image_heads = 12;
  std::size_t image_width = 768;
  std::size_t text_layers = 12;
  std::size_t text_heads = 8;
  std::size_t text_width = 512;
  std::size_t context_length = 77;
  std::size_t vocab_size = 0;  // filled from the vocabulary
  std::size_t projection_dim = 512;
  std::size_t mlp_ratio = 4;
  double temperature_init = 0.07;
  double temperature_min = 0.01;
  double temperature_max = 1.0;
  double layer_norm_eps = 1e-5;
  Activation activation = Activation::Gelu;

  static ModelConfig full() { return {}; }

  static ModelConfig tiny() {
    ModelConfig c;
    c.image_resolution = 64;
    c.image_layers = 2;
    c.image_heads = 2;
    c.image_width = 64;
    c.text_layers = 2;
    c.text_heads = 2;
    c.text_width = 64;
    c.context_length = 16;
    c.projection_dim = 64;
    return c;
  }

  static ModelConfig preset(const std::string& name) {
    if (name == "tiny") return tiny();
    if (name == "full") return full();
    throw ConfigError("unknown preset '" + name + "' (expected tiny or full)");
  }

  std::size_t grid_side() const { return image_resolution / patch_size; }
  std::size_t patch_count() const { return grid_side() * grid_side(); }
  std::size_t patch_length() const { return patch_size * patch_size * 3; }

  void validate() const {
    auto positive = [](std::size_t v, const char* what) {
      if (v == 0) throw ConfigError(std::string(what) + " must be positive");
    };
    positive(image_resolution, "image_resolution");
    positive(patch_size, "patch_size");
    positive(image_layers, "image_layers");
    positive(image_heads, "image_heads");
    positive(image_width, "image_width");
    positive(text_layers, "text_layers");
    positive(text_heads, "text_heads");
    positive(text_width, "text_width");
    positive(projection_dim, "projection_dim");
    positive(mlp_ratio, "mlp_ratio");
    if (image_resolution % patch_size != 0) throw ConfigError("image_resolution must be divisible by patch_size");
    if (image_width % image_heads != 0) throw ConfigError("image_width must be divisible by image_heads");
    if (text_width % text_heads != 0) throw ConfigError("text_width must be divisible by text_heads");
    if (context_length < 3) throw ConfigError("context_length must be at least 3");
    if (vocab_size < 4) throw ConfigError("vocab_size must cover the special tokens");
    if (!(temperature_min > 0 && temperature_min <= temperature_init && temperature_init <= temperature_max)) {
      throw ConfigError("temperature_init must lie in [temperature_min, temperature_max] with min > 0");
    }
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"image_resolution", c.image_resolution},
                     {"patch_size", c.patch_size},
                     {"image_layers", c.image_layers},
                     {"image_heads", c.image_heads},
                     {"image_width", c.image_width},
                     {"text_layers", c.text_layers},
                     {"text_heads", c.text_heads},
                     {"text_width", c.text_width},
                     {"context_length", c.context_length},
                     {"vocab_size", c.vocab_size},
                     {"projection_dim", c.projection_dim},
                     {"mlp_ratio", c.mlp_ratio},
                     {"temperature_init", c.temperature_init},
                     {"temperature_min", c.temperature_min},
                     {"temperature_max", c.temperature_max},
                     {"layer_norm_eps", c.layer_norm_eps},
                     {"activation", to_string(c.activation)}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.image_resolution = j.value("image_resolution", d.image_resolution);
  c.patch_size = j.value("patch_size", d.patch_size);
  c.image_layers = j.value("image_layers", d.image_layers);
  c.image_heads = j.value("image_heads", d.image_heads);
  c.image_width = j.value("image_width", d.image_width);
  c.text_layers = j.value("text_layers", d.text_layers);
  c.text_heads = j.value("text_heads", d.text_heads);
  c.text_width = j.value("text_width", d.text_width);
  c.context_length = j.value("context_length", d.context_length);
  c.vocab_size = j.value("vocab_size", d.vocab_size);
  c.projection_dim = j.value("projection_dim", d.projection_dim);
  c.mlp_ratio = j.value("mlp_ratio", d.mlp_ratio);
  c.temperature_init = j.value("temperature_init", d.temperature_init);
  c.temperature_min = j.value("temperature_min", d.temperature_min);
  c.temperature_max = j.value("temperature_max", d.temperature_max);
  c.layer_norm_eps = j.value("layer_norm_eps", d.layer_norm_eps);
  c.activation = activation_from_string(j.value("activation", std::string("gelu")));
}

}  // namespace nutricast
