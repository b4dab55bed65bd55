#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "nutricast/core/autograd.hpp"
#include "nutricast/model/encoders.hpp"

namespace nutricast {

/// N x N cosine similarities, row i = image i against every text, plus the
/// temperature used to sharpen them.
struct SimilarityMatrix {
  Tensor<double> values;
  double temperature = 0.07;

  std::size_t size() const { return values.rows(); }

  SimilarityMatrix transposed() const {
    const std::size_t n = values.rows(), m = values.cols();
    Tensor<double> t = Tensor<double>::matrix(m, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) t(j, i) = values(i, j);
    return {std::move(t), temperature};
  }
};

template <typename A, typename B>
double cosine_similarity(std::span<const A> a, std::span<const B> b) {
  if (a.size() != b.size()) throw DimensionError("cosine_similarity: dimension mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (!(na > 0) || !(nb > 0)) throw DomainError("cosine_similarity: zero-norm vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

template <typename T>
double cosine_similarity(const Embedding<T>& a, const Embedding<T>& b) {
  return cosine_similarity(std::span<const T>(a.values), std::span<const T>(b.values));
}

template <typename T>
SimilarityMatrix similarity_matrix(const std::vector<Embedding<T>>& images, const std::vector<Embedding<T>>& texts,
                                   double temperature) {
  if (images.size() != texts.size() || images.empty()) throw DimensionError("similarity_matrix: need N images and N texts");
  const std::size_t n = images.size();
  Tensor<double> s = Tensor<double>::matrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s(i, j) = cosine_similarity(images[i], texts[j]);
  return {std::move(s), temperature};
}

namespace detail {
inline void check_similarity(const SimilarityMatrix& s) {
  if (s.values.rank() != 2 || s.values.rows() != s.values.cols()) {
    throw DimensionError("similarity matrix must be square, got " + shape_string(s.values.shape()));
  }
  if (!(s.temperature > 0)) throw DomainError("temperature must be positive");
}
}  // namespace detail

/// Image-side InfoNCE: mean over rows of -log softmax(S_i. / tau)[i].
inline double info_nce_image(const SimilarityMatrix& s) {
  detail::check_similarity(s);
  const std::size_t n = s.size();
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double mx = s.values(i, 0) / s.temperature;
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, s.values(i, j) / s.temperature);
    double acc = 0;
    for (std::size_t j = 0; j < n; ++j) acc += std::exp(s.values(i, j) / s.temperature - mx);
    total += mx + std::log(acc) - s.values(i, i) / s.temperature;
  }
  return total / static_cast<double>(n);
}

/// Text-side InfoNCE: the same objective over columns.
inline double info_nce_text(const SimilarityMatrix& s) {
  detail::check_similarity(s);
  return info_nce_image(s.transposed());
}

inline double clip_loss(const SimilarityMatrix& s) { return 0.5 * (info_nce_image(s) + info_nce_text(s)); }

/// Symmetric contrastive loss on the tape. `images` and `texts` are N x D
/// embedding rows; `inv_temperature` is a scalar node (1 / tau).
template <typename T>
Var clip_loss(Tape<T>& tape, Var images, Var texts, Var inv_temperature) {
  const std::size_t n = tape.value(images).rows();
  if (tape.value(texts).rows() != n) throw DimensionError("clip_loss: batch size mismatch");
  Var sim = ad::matmul_nt(tape, ad::normalize_rows(tape, images), ad::normalize_rows(tape, texts));
  Var logits = ad::mul_scalar(tape, sim, inv_temperature);
  std::vector<std::size_t> diag(n);
  std::iota(diag.begin(), diag.end(), std::size_t{0});
  Var li = ad::softmax_cross_entropy(tape, logits, diag);
  Var lt = ad::softmax_cross_entropy(tape, ad::transpose(tape, logits), diag);
  return ad::weighted_sum(tape, {li, lt}, 0.5);
}

}  // namespace nutricast
