#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nutricast/core/autograd.hpp"
#include "nutricast/core/parameter.hpp"

namespace nutricast {

enum class Activation { Gelu, Relu };

inline std::string to_string(Activation a) { return a == Activation::Gelu ? "gelu" : "relu"; }
inline Activation activation_from_string(const std::string& s) {
  if (s == "gelu") return Activation::Gelu;
  if (s == "relu") return Activation::Relu;
  throw ConfigError("unknown activation '" + s + "'");
}

/// Binds parameter names (relative to a prefix) to tape leaves. `Store` is
/// either ParameterStore<T> (gradients flow back into the parameters) or
/// const ParameterStore<T> (read-only inference).
template <typename T, typename Store>
class Binder {
 public:
  Binder(Tape<T>& tape, Store& store, std::string prefix = {})
      : tape_(&tape), store_(&store), prefix_(std::move(prefix)) {}

  Var operator()(const std::string& name) const { return tape_->parameter(store_->at(prefix_ + name)); }
  Binder sub(const std::string& scope) const { return Binder(*tape_, *store_, prefix_ + scope + "."); }
  Tape<T>& tape() const { return *tape_; }
  Store& store() const { return *store_; }
  const std::string& prefix() const { return prefix_; }

 private:
  Tape<T>* tape_;
  Store* store_;
  std::string prefix_;
};

template <typename T>
Var activate(Tape<T>& tape, Var x, Activation act) {
  return act == Activation::Gelu ? ad::gelu(tape, x) : ad::relu(tape, x);
}

// --- parameter layout --------------------------------------------------------

template <typename T>
void add_linear(ParameterStore<T>& store, Rng& rng, const std::string& prefix, std::size_t in, std::size_t out,
                bool bias = true) {
  store.add(prefix + ".w", fan_in_normal<T>(rng, in, out));
  if (bias) store.add(prefix + ".b", Tensor<T>({out}, T{0}));
}

template <typename T>
void add_layer_norm(ParameterStore<T>& store, const std::string& prefix, std::size_t width) {
  store.add(prefix + ".gamma", Tensor<T>({width}, T{1}));
  store.add(prefix + ".beta", Tensor<T>({width}, T{0}));
}

template <typename T>
void add_attention(ParameterStore<T>& store, Rng& rng, const std::string& prefix, std::size_t width) {
  for (const char* p : {"q", "k", "v", "o"}) add_linear(store, rng, prefix + "." + p, width, width);
}

template <typename T>
void add_feed_forward(ParameterStore<T>& store, Rng& rng, const std::string& prefix, std::size_t width,
                      std::size_t hidden) {
  add_linear(store, rng, prefix + ".fc1", width, hidden);
  add_linear(store, rng, prefix + ".fc2", hidden, width);
}

template <typename T>
void add_transformer_block(ParameterStore<T>& store, Rng& rng, const std::string& prefix, std::size_t width,
                           std::size_t hidden) {
  add_layer_norm(store, prefix + ".ln1", width);
  add_attention(store, rng, prefix + ".attn", width);
  add_layer_norm(store, prefix + ".ln2", width);
  add_feed_forward(store, rng, prefix + ".mlp", width, hidden);
}

// --- forward -----------------------------------------------------------------

template <typename T, typename B>
Var linear(const B& bind, Var x, bool bias = true) {
  auto& tape = bind.tape();
  Var y = ad::matmul(tape, x, bind("w"));
  return bias ? ad::add_row(tape, y, bind("b")) : y;
}

template <typename T, typename B>
Var layer_norm(const B& bind, Var x, double eps = 1e-5) {
  return ad::layer_norm(bind.tape(), x, bind("gamma"), bind("beta"), eps);
}

/// Multi-head self attention over the rows of `x` (tokens x width).
/// `key_mask[j] == false` removes token j from every query's softmax.
/// `attention`, when given, receives each head's weight matrix.
template <typename T, typename B>
Var multi_head_attention(const B& bind, Var x, std::size_t heads, const std::vector<bool>* key_mask = nullptr,
                         std::vector<Var>* attention = nullptr) {
  auto& tape = bind.tape();
  const std::size_t width = tape.value(x).cols();
  if (heads == 0 || width % heads != 0) {
    throw ConfigError("attention width " + std::to_string(width) + " not divisible by " + std::to_string(heads) +
                      " heads");
  }
  const std::size_t head_dim = width / heads;
  Var q = linear<T>(bind.sub("q"), x);
  Var k = linear<T>(bind.sub("k"), x);
  Var v = linear<T>(bind.sub("v"), x);
  std::vector<Var> outs;
  outs.reserve(heads);
  if (attention) attention->clear();
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = ad::slice_cols(tape, q, h * head_dim, head_dim);
    Var kh = ad::slice_cols(tape, k, h * head_dim, head_dim);
    Var vh = ad::slice_cols(tape, v, h * head_dim, head_dim);
    Var weights = ad::softmax_rows(tape, ad::matmul_nt(tape, qh, kh), scale, key_mask);
    if (attention) attention->push_back(weights);
    outs.push_back(ad::matmul(tape, weights, vh));
  }
  Var joined = heads == 1 ? outs[0] : ad::concat_cols(tape, outs);
  return linear<T>(bind.sub("o"), joined);
}

template <typename T, typename B>
Var feed_forward(const B& bind, Var x, Activation act) {
  auto& tape = bind.tape();
  const std::size_t in = tape.value(x).cols();
  if (bind.store().at(bind.prefix() + "fc1.w").value.rows() != in) {
    throw DimensionError("feed_forward: input width " + std::to_string(in) + " does not match fc1");
  }
  Var h = activate(tape, linear<T>(bind.sub("fc1"), x), act);
  return linear<T>(bind.sub("fc2"), h);
}

/// Pre-norm residual block: x + attn(ln1(x)), then + mlp(ln2(.)).
/// `normed_input`, when given, receives the ln1 output.
template <typename T, typename B>
Var transformer_block(const B& bind, Var x, std::size_t heads, Activation act,
                      const std::vector<bool>* key_mask = nullptr, Var* normed_input = nullptr,
                      double eps = 1e-5, std::vector<Var>* attention = nullptr) {
  auto& tape = bind.tape();
  Var n1 = layer_norm<T>(bind.sub("ln1"), x, eps);
  if (normed_input) *normed_input = n1;
  Var h = ad::add(tape, x, multi_head_attention<T>(bind.sub("attn"), n1, heads, key_mask, attention));
  Var n2 = layer_norm<T>(bind.sub("ln2"), h, eps);
  return ad::add(tape, h, feed_forward<T>(bind.sub("mlp"), n2, act));
}

// --- plain value helpers -------------------------------------------------------

/// softmax(logits / temperature).
template <typename T>
std::vector<T> softmax(std::span<const T> logits, double temperature = 1.0) {
  if (!(temperature > 0)) throw DomainError("softmax temperature must be positive");
  if (logits.empty()) return {};
  std::vector<T> out(logits.size());
  T mx = logits[0];
  for (T v : logits) mx = std::max(mx, v);
  T sum{0};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = static_cast<T>(std::exp((logits[i] - mx) / temperature));
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

template <typename T>
std::vector<T> softmax(const std::vector<T>& logits, double temperature = 1.0) {
  return softmax(std::span<const T>(logits), temperature);
}

}  // namespace nutricast
