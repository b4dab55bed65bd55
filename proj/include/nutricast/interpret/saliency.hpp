#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "nutricast/model/model.hpp"
#include "nutricast/text/tokenizer.hpp"

namespace nutricast {

enum class SaliencyMethod { GradientTimesInput, Attention };

inline SaliencyMethod saliency_method_from_string(const std::string& s) {
  if (s == "grad-x-input" || s == "gradient") return SaliencyMethod::GradientTimesInput;
  if (s == "attention") return SaliencyMethod::Attention;
  throw ConfigError("unknown saliency method '" + s + "' (expected grad-x-input or attention)");
}

struct TokenWeight {
  std::string token;
  std::size_t position = 0;
  double weight = 0.0;
  bool special = false;
};

/// One entry per tokenizer position. PAD, BOS and EOS have weight 0.
struct TokenSaliency {
  std::vector<TokenWeight> tokens;
  std::size_t target_class = 0;
  std::string nutrient;
  std::string warning;

  /// Non-special entries, in statement order.
  std::vector<TokenWeight> words() const {
    std::vector<TokenWeight> out;
    for (const auto& t : tokens)
      if (!t.special) out.push_back(t);
    return out;
  }
};

/// Per-token importance for one class logit.
///   GradientTimesInput: ||d logit / d e_t|| * ||e_t|| on the token embedding rows.
///   Attention: final-block attention from the EOS query, averaged over heads.
/// Weights are divided by their maximum.
template <typename T>
TokenSaliency text_saliency(const NutrientModel<T>& model, const std::string& text, const ItemInput<T>& other,
                            const std::string& nutrient, std::size_t target_class,
                            SaliencyMethod method = SaliencyMethod::GradientTimesInput) {
  if (!uses_text(model.variant)) throw ContractError("text saliency needs a model that reads text, not " + to_string(model.variant));
  const HeadConfig& head = model.head(nutrient);
  if (target_class >= head.class_count) {
    throw DomainError("target class " + std::to_string(target_class) + " out of range for '" + nutrient + "'");
  }
  const auto ids = model.prepare_text(text);
  TokenSaliency s;
  s.target_class = target_class;
  s.nutrient = nutrient;
  const auto words = split_words(text);
  std::size_t w = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    TokenWeight t;
    t.position = i;
    t.special = Vocabulary::is_special(ids[i]);
    t.token = t.special ? model.vocab.token(ids[i]) : (w < words.size() ? words[w++] : model.vocab.token(ids[i]));
    s.tokens.push_back(t);
  }
  if (words.empty()) {
    s.warning = "empty ingredient statement; saliency is all zero";
    return s;
  }

  Tape<T> tape(GradMode::All);
  Binder<T, const ParameterStore<T>> bind(tape, model.params);
  ItemInput<T> in = other;
  in.tokens = ids;
  TextTrace trace;
  Var logits = model.logits(bind, nutrient, in, nullptr, &trace);

  std::vector<double> weight(ids.size(), 0.0);
  if (method == SaliencyMethod::GradientTimesInput) {
    tape.backward(ad::pick(tape, logits, 0, target_class));
    const Tensor<T>& E = tape.value(trace.token_embeddings);
    const Tensor<T> G = tape.grad(trace.token_embeddings);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      double g2 = 0, e2 = 0;
      for (std::size_t k = 0; k < E.cols(); ++k) {
        g2 += static_cast<double>(G(i, k)) * G(i, k);
        e2 += static_cast<double>(E(i, k)) * E(i, k);
      }
      weight[i] = std::sqrt(g2) * std::sqrt(e2);
    }
  } else {
    for (Var a : trace.last_attention) {
      const Tensor<T>& W = tape.value(a);
      for (std::size_t j = 0; j < ids.size(); ++j)
        weight[j] += static_cast<double>(W(trace.eos, j)) / static_cast<double>(trace.last_attention.size());
    }
  }
  double mx = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (s.tokens[i].special) weight[i] = 0.0;
    mx = std::max(mx, weight[i]);
  }
  for (std::size_t i = 0; i < ids.size(); ++i) s.tokens[i].weight = mx > 0 ? weight[i] / mx : 0.0;
  return s;
}

inline nlohmann::json to_json(const TokenSaliency& s) {
  nlohmann::json tokens = nlohmann::json::array();
  for (const auto& t : s.tokens)
    tokens.push_back({{"token", t.token}, {"position", t.position}, {"weight", t.weight}, {"special", t.special}});
  nlohmann::json j = {{"nutrient", s.nutrient}, {"target_class", s.target_class}, {"tokens", tokens}};
  if (!s.warning.empty()) j["warning"] = s.warning;
  return j;
}

}  // namespace nutricast
