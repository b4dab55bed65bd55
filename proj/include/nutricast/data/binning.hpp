#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nutricast/core/error.hpp"

namespace nutricast {

/// Label value for items above the outlier threshold.
inline constexpr int kExcluded = -1;

/// Discretization of one nutrient channel. Class 0 is reserved for an exact
/// zero; classes 1..K hold equal-count groups of the sorted non-zero values.
struct BinningSpec {
  std::string nutrient;
  std::string unit;
  double percentile = 0.95;
  double threshold = 0.0;
  std::size_t class_count = 0;               // K, non-zero classes
  std::vector<double> edges;                 // inclusive upper edge of classes 1..K
  std::vector<double> representatives;       // r_0..r_K, r_0 = 0
  std::vector<std::size_t> class_sizes;      // sizes of classes 0..K on the fitting data

  std::size_t total_classes() const noexcept { return class_count + 1; }

  /// Class for a new value, or kExcluded above the threshold.
  int label_for(double value) const {
    if (!std::isfinite(value) || value < 0) throw DomainError("nutrient value must be finite and non-negative");
    if (value == 0.0) return 0;
    if (value > threshold) return kExcluded;
    if (class_count == 0) return kExcluded;
    auto it = std::lower_bound(edges.begin(), edges.end(), value);
    if (it == edges.end()) return static_cast<int>(class_count);
    return static_cast<int>(it - edges.begin()) + 1;
  }

  double representative(std::size_t cls) const {
    if (cls >= representatives.size()) {
      throw DomainError("class " + std::to_string(cls) + " unknown to binning of '" + nutrient + "'");
    }
    return representatives[cls];
  }

  friend bool operator==(const BinningSpec&, const BinningSpec&) = default;
};

inline void to_json(nlohmann::json& j, const BinningSpec& b) {
  j = {{"nutrient", b.nutrient},
       {"unit", b.unit},
       {"percentile", b.percentile},
       {"threshold", b.threshold},
       {"class_count", b.class_count},
       {"edges", b.edges},
       {"representatives", b.representatives},
       {"class_sizes", b.class_sizes}};
}

inline void from_json(const nlohmann::json& j, BinningSpec& b) {
  j.at("nutrient").get_to(b.nutrient);
  b.unit = j.value("unit", std::string());
  j.at("percentile").get_to(b.percentile);
  j.at("threshold").get_to(b.threshold);
  j.at("class_count").get_to(b.class_count);
  j.at("edges").get_to(b.edges);
  j.at("representatives").get_to(b.representatives);
  b.class_sizes = j.value("class_sizes", std::vector<std::size_t>{});
  if (b.edges.size() != b.class_count || b.representatives.size() != b.class_count + 1) {
    throw ConfigError("binning spec for '" + b.nutrient + "' has inconsistent lengths");
  }
}

/// Nearest-rank quantile: the smallest sample with at least p*n samples at or
/// below it. Never excludes more than (1-p)*n values.
inline double nearest_rank_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw DomainError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(p * static_cast<double>(values.size()) - 1e-9);
  const std::size_t idx = rank < 1 ? 0 : static_cast<std::size_t>(rank) - 1;
  return values[std::min(idx, values.size() - 1)];
}

struct BinningResult {
  std::vector<int> labels;  // per input value; kExcluded above threshold
  BinningSpec spec;
};

inline double median_of_sorted(const double* first, std::size_t n) {
  return n % 2 ? first[n / 2] : 0.5 * (first[n / 2 - 1] + first[n / 2]);
}

/// Discretizes one nutrient channel:
///  1. threshold t = percentile quantile; values > t are excluded;
///  2. exact zeros become class 0;
///  3. sorted non-zero values are cut into K equal-count groups, with
///     K = max(1, round(n_nonzero / n_zero)) unless overridden; a cut that
///     lands inside a run of equal values moves past the run, and groups
///     left empty by that are dropped;
///  4. each class is represented by the median of its members.
inline BinningResult bin_nutrient(const std::vector<double>& values, std::optional<std::size_t> k_override = {},
                                  double percentile = 0.95, const std::string& nutrient = {}) {
  if (values.empty()) throw DomainError("bin_nutrient: no values");
  for (double v : values)
    if (!std::isfinite(v) || v < 0) throw DomainError("bin_nutrient: values must be finite and non-negative");
  if (!(percentile > 0 && percentile <= 1)) throw ConfigError("bin_nutrient: percentile must be in (0, 1]");
  if (k_override && *k_override == 0) throw ConfigError("bin_nutrient: k override must be positive");

  BinningResult out;
  BinningSpec& spec = out.spec;
  spec.nutrient = nutrient;
  spec.percentile = percentile;
  spec.threshold = nearest_rank_quantile(values, percentile);

  std::vector<double> nonzero;
  std::size_t zeros = 0;
  for (double v : values) {
    if (v > spec.threshold) continue;
    if (v == 0.0) ++zeros;
    else nonzero.push_back(v);
  }
  std::sort(nonzero.begin(), nonzero.end());
  const std::size_t n = nonzero.size();

  std::size_t k = 0;
  if (n > 0) {
    if (k_override) {
      k = *k_override;
    } else {
      if (zeros == 0) {
        throw ConfigError("bin_nutrient: no zero values, so the class count is undefined; pass a k override");
      }
      k = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(n) / zeros)));
    }
    k = std::min(k, n);
  }

  // Cut positions: first index of each following group.
  std::vector<std::size_t> cuts;
  std::size_t prev = 0;
  for (std::size_t c = 1; c < k; ++c) {
    std::size_t b = static_cast<std::size_t>(std::llround(static_cast<double>(c) * n / static_cast<double>(k)));
    b = std::max(b, prev);
    while (b > 0 && b < n && nonzero[b] == nonzero[b - 1]) ++b;
    if (b <= prev || b >= n) continue;
    cuts.push_back(b);
    prev = b;
  }
  cuts.push_back(n);

  spec.class_sizes.push_back(zeros);
  spec.representatives.push_back(0.0);
  std::size_t start = 0;
  if (n > 0) {
    for (std::size_t end : cuts) {
      spec.edges.push_back(nonzero[end - 1]);
      spec.representatives.push_back(median_of_sorted(nonzero.data() + start, end - start));
      spec.class_sizes.push_back(end - start);
      start = end;
    }
  }
  spec.class_count = spec.edges.size();

  out.labels.reserve(values.size());
  for (double v : values) out.labels.push_back(spec.label_for(v));
  return out;
}

}  // namespace nutricast
