#pragma once

// Helpers shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "nutricast/core/random.hpp"
#include "nutricast/data/binning.hpp"

namespace testing_support {

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("nutricast-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Random nutrient column: a share of exact zeros, the rest either continuous
// or rounded to one decimal so tie runs appear.
inline std::vector<double> random_column(nutricast::Rng& rng) {
  const std::size_t n = 1 + static_cast<std::size_t>(rng.below(300));
  const double zero_share = rng.uniform(0.05, 0.6);
  const bool rounded = rng.bernoulli(0.5);
  const double scale = rng.uniform(1.0, 100.0);
  std::vector<double> v(n);
  for (double& x : v) {
    if (rng.bernoulli(zero_share)) {
      x = 0.0;
      continue;
    }
    x = scale * rng.uniform(0.001, 1.0);
    if (rounded) x = std::max(0.1, std::round(x * 10.0) / 10.0);
  }
  return v;
}

inline std::size_t longest_run(const std::vector<double>& sorted) {
  std::size_t best = sorted.empty() ? 0 : 1, cur = 1;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    cur = sorted[i] == sorted[i - 1] ? cur + 1 : 1;
    best = std::max(best, cur);
  }
  return best;
}

// Returns an empty string when every binning property holds, otherwise the
// first violation. `k_requested` is the class count the rule (or override)
// asked for before tie handling.
inline std::string binning_violation(const std::vector<double>& values, const nutricast::BinningResult& r) {
  using nutricast::kExcluded;
  const auto& spec = r.spec;
  if (r.labels.size() != values.size()) return "label count";
  std::size_t excluded = 0, at_threshold = 0;
  std::vector<double> kept_nonzero;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == spec.threshold) ++at_threshold;
    if (r.labels[i] == kExcluded) {
      ++excluded;
      if (!(values[i] > spec.threshold)) return "excluded a value at or below the threshold";
      continue;
    }
    if ((r.labels[i] == 0) != (values[i] == 0.0)) return "label 0 must coincide with value 0";
    if (values[i] > 0) kept_nonzero.push_back(values[i]);
  }
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::size_t j = 0; j < values.size(); ++j)
      if (r.labels[i] != kExcluded && r.labels[j] != kExcluded && values[i] < values[j] && r.labels[i] > r.labels[j])
        return "labels not monotone in value";
  const double n = static_cast<double>(values.size());
  if (static_cast<double>(excluded) > 0.05 * n + static_cast<double>(at_threshold) + 1e-9) return "excluded too many";
  if (!std::is_sorted(spec.edges.begin(), spec.edges.end()) ||
      std::adjacent_find(spec.edges.begin(), spec.edges.end()) != spec.edges.end())
    return "edges not strictly increasing";

  std::sort(kept_nonzero.begin(), kept_nonzero.end());
  const std::size_t m = kept_nonzero.size();
  if (m == 0) return spec.class_count == 0 ? "" : "classes without non-zero values";
  const std::size_t run = longest_run(kept_nonzero);
  // Realized classes: each is the ideal equal-count group, shifted by at most
  // one tie run at either end. A run long enough to swallow a whole group
  // merges groups, which lowers the class count.
  const double target = static_cast<double>(m) / static_cast<double>(spec.class_count);
  for (std::size_t c = 1; c < spec.class_sizes.size(); ++c) {
    const double size = static_cast<double>(spec.class_sizes[c]);
    if (std::abs(size - target) > static_cast<double>(run) + 1.0) return "class size outside tie-run tolerance";
    const double lo = c == 1 ? 0.0 : spec.edges[c - 2], hi = spec.edges[c - 1];
    if (!(spec.representatives[c] > lo && spec.representatives[c] <= hi)) return "representative outside its class";
  }
  return "";
}

// Hand-Till multiclass AUC by explicit pair counting, no ranks. Pairs with
// an absent class are skipped.
inline double brute_force_macro_auc(const std::vector<std::vector<double>>& conf, const std::vector<std::size_t>& y) {
  const std::size_t m = conf.front().size();
  double total = 0;
  std::size_t pairs = 0;
  auto a = [&](std::size_t i, std::size_t j) {
    double wins = 0, count = 0;
    for (std::size_t p = 0; p < y.size(); ++p) {
      if (y[p] != i) continue;
      for (std::size_t q = 0; q < y.size(); ++q) {
        if (y[q] != j) continue;
        count += 1;
        if (conf[p][i] > conf[q][i]) wins += 1;
        else if (conf[p][i] == conf[q][i]) wins += 0.5;
      }
    }
    return count > 0 ? wins / count : -1.0;
  };
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      const double aij = a(i, j), aji = a(j, i);
      if (aij < 0 || aji < 0) continue;
      total += 0.5 * (aij + aji);
      ++pairs;
    }
  return total / static_cast<double>(pairs);
}

// n <= 200 rows, M <= 5 classes, scores quantized on some trials so ties occur.
struct AucInstance {
  std::vector<std::vector<double>> conf;
  std::vector<std::size_t> labels;
};

inline AucInstance random_auc_instance(nutricast::Rng& rng) {
  AucInstance inst;
  const std::size_t m = 2 + static_cast<std::size_t>(rng.below(4));
  const std::size_t n = 2 + static_cast<std::size_t>(rng.below(199));
  const bool coarse = rng.bernoulli(0.5);
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<double> row(m);
    double sum = 0;
    for (double& v : row) {
      v = coarse ? static_cast<double>(rng.below(4)) + 0.5 : rng.uniform();
      sum += v;
    }
    for (double& v : row) v /= sum;
    inst.conf.push_back(row);
    inst.labels.push_back(static_cast<std::size_t>(rng.below(m)));
  }
  // guarantee at least two classes
  inst.labels[0] = 0;
  inst.labels[1] = 1;
  return inst;
}

}  // namespace testing_support
