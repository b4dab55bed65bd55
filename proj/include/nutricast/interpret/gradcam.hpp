#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "nutricast/model/model.hpp"

namespace nutricast {

/// Patch-grid heatmap, row-major, values in [0, 1].
struct Heatmap {
  std::size_t side = 0;
  std::vector<double> values;
  std::vector<double> raw;  // ReLU output before min-max normalization
  std::size_t target_class = 0;
  std::string nutrient;

  double at(std::size_t row, std::size_t col) const { return values.at(row * side + col); }
  std::size_t argmax() const {
    return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
  }
};

inline void min_max_normalize(std::vector<double>& v) {
  if (v.empty()) return;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double a = *lo, b = *hi;
  for (double& x : v) x = b > a ? (x - a) / (b - a) : 0.0;
}

/// Gradient-weighted activation map over the image patches.
///
/// Activations are the patch rows (class token excluded) entering the
/// attention of the final image block, i.e. that block's ln1 output. The
/// block's own output cannot serve: with class-token readout only its class
/// row reaches the logits, so its patch rows carry zero gradient.
template <typename T>
Heatmap gradcam(const NutrientModel<T>& model, const Tensor<T>& grid, const ItemInput<T>& other,
                const std::string& nutrient, std::size_t target_class) {
  if (!uses_image(model.variant)) throw ContractError("gradcam needs a model that reads images, not " + to_string(model.variant));
  const HeadConfig& head = model.head(nutrient);
  if (target_class >= head.class_count) {
    throw DomainError("target class " + std::to_string(target_class) + " out of range for '" + nutrient + "' (" +
                      std::to_string(head.class_count) + " classes)");
  }
  Tape<T> tape(GradMode::All);
  Binder<T, const ParameterStore<T>> bind(tape, model.params);
  ItemInput<T> in = other;
  in.image = grid;
  ImageTrace trace;
  Var logits = model.logits(bind, nutrient, in, &trace);
  tape.backward(ad::pick(tape, logits, 0, target_class));

  const Tensor<T>& A = tape.value(trace.last_block_in);
  const Tensor<T> G = tape.grad(trace.last_block_in);
  const std::size_t patches = A.rows() - 1, width = A.cols();
  std::vector<double> alpha(width, 0.0);
  for (std::size_t p = 1; p <= patches; ++p)
    for (std::size_t k = 0; k < width; ++k) alpha[k] += static_cast<double>(G(p, k));
  for (double& a : alpha) a /= static_cast<double>(patches);

  Heatmap h;
  h.side = model.config.grid_side();
  h.target_class = target_class;
  h.nutrient = nutrient;
  h.raw.resize(patches);
  for (std::size_t p = 0; p < patches; ++p) {
    double s = 0;
    for (std::size_t k = 0; k < width; ++k) s += alpha[k] * static_cast<double>(A(p + 1, k));
    h.raw[p] = std::max(0.0, s);
  }
  h.values = h.raw;
  min_max_normalize(h.values);
  return h;
}

inline nlohmann::json to_json(const Heatmap& h) {
  return {{"nutrient", h.nutrient}, {"target_class", h.target_class}, {"side", h.side}, {"values", h.values}};
}

}  // namespace nutricast
