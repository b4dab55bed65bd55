#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "nutricast/core/error.hpp"

namespace nutricast {

/// Mann-Whitney AUC, (wins + ties / 2) / (n_pos * n_neg), via midranks.
inline double auc_binary(const std::vector<double>& scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw DimensionError("auc_binary: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (bool p : positive) n_pos += p;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DomainError("auc_binary: AUC is undefined without both classes");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0;  // sum of positive midranks, 1-based
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (positive[idx[k]]) rank_sum += midrank;
    i = j;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1) / 2) / (np * nn);
}

struct PairAuc {
  std::size_t i = 0, j = 0;
  std::size_t n_i = 0, n_j = 0;
  double auc = 0.0;  // (A(i|j) + A(j|i)) / 2
};

struct OvoAuc {
  double macro = 0.0;
  double weighted = 0.0;
  std::vector<PairAuc> pairs;
  std::vector<std::pair<std::size_t, std::size_t>> skipped;  // pairs with an absent class
};

/// One-vs-one multiclass AUC (Hand & Till). `confidences` is n x M.
/// weighted averages the pair AUCs with weight n_i + n_j.
inline OvoAuc macro_auc_ovo(const std::vector<std::vector<double>>& confidences, const std::vector<std::size_t>& labels) {
  if (confidences.size() != labels.size()) throw DimensionError("macro_auc_ovo: row count differs from label count");
  if (confidences.empty()) throw DomainError("macro_auc_ovo: no samples");
  const std::size_t m = confidences.front().size();
  for (const auto& row : confidences)
    if (row.size() != m) throw DimensionError("macro_auc_ovo: ragged confidence matrix");
  std::vector<std::size_t> counts(m, 0);
  for (auto l : labels) {
    if (l >= m) throw DomainError("macro_auc_ovo: label " + std::to_string(l) + " out of range");
    ++counts[l];
  }

  OvoAuc out;
  double weight_total = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      if (counts[i] == 0 || counts[j] == 0) {
        out.skipped.emplace_back(i, j);
        continue;
      }
      std::vector<double> si, sj;
      std::vector<bool> pos;
      for (std::size_t k = 0; k < labels.size(); ++k) {
        if (labels[k] != i && labels[k] != j) continue;
        si.push_back(confidences[k][i]);
        sj.push_back(confidences[k][j]);
        pos.push_back(labels[k] == i);
      }
      const double a_ij = auc_binary(si, pos);
      pos.flip();
      const double a_ji = auc_binary(sj, pos);
      PairAuc p{i, j, counts[i], counts[j], 0.5 * (a_ij + a_ji)};
      out.pairs.push_back(p);
      const double w = static_cast<double>(p.n_i + p.n_j);
      out.macro += p.auc;
      out.weighted += w * p.auc;
      weight_total += w;
    }
  }
  if (out.pairs.empty()) throw DomainError("macro_auc_ovo: fewer than two classes present");
  out.macro /= static_cast<double>(out.pairs.size());
  out.weighted /= weight_total;
  return out;
}

}  // namespace nutricast
