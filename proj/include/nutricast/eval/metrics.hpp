#pragma once

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nutricast/core/error.hpp"
#include "nutricast/data/binning.hpp"

namespace nutricast {

enum class ErrorBucket { Under10, Under30, Over30, Undefined };
inline constexpr std::array<const char*, 4> kBucketNames{"lt10", "lt30", "ge30", "undefined"};

/// |predicted - truth| / truth, with 0/0 -> 0 and x/0 -> undefined.
inline std::optional<double> relative_error(double predicted, double truth) {
  if (truth > 0) return std::abs(predicted - truth) / truth;
  if (predicted == 0) return 0.0;
  return std::nullopt;
}

inline ErrorBucket bucket_of(std::optional<double> rel) {
  if (!rel) return ErrorBucket::Undefined;
  if (*rel < 0.10) return ErrorBucket::Under10;
  if (*rel < 0.30) return ErrorBucket::Under30;
  return ErrorBucket::Over30;
}

struct ErrorHistogram {
  std::array<std::size_t, 4> counts{};
  std::size_t total = 0;

  double fraction(ErrorBucket b) const {
    return total ? static_cast<double>(counts[static_cast<std::size_t>(b)]) / static_cast<double>(total) : 0.0;
  }
  void add(ErrorBucket b) {
    ++counts[static_cast<std::size_t>(b)];
    ++total;
  }
};

/// Buckets the relative error of each item's class representative against
/// its true value.
inline ErrorHistogram error_distribution(const std::vector<std::size_t>& predicted_classes, const BinningSpec& spec,
                                         const std::vector<double>& truths) {
  if (predicted_classes.size() != truths.size()) throw DimensionError("error_distribution: length mismatch");
  ErrorHistogram h;
  for (std::size_t i = 0; i < truths.size(); ++i)
    h.add(bucket_of(relative_error(spec.representative(predicted_classes[i]), truths[i])));
  return h;
}

enum class NutrientKind { Risk, Beneficial };

inline std::string to_string(NutrientKind k) { return k == NutrientKind::Risk ? "risk" : "beneficial"; }

/// Declared-value direction of the labeling tolerance. Nutrients without a
/// known direction return nullopt.
inline std::optional<NutrientKind> nutrient_kind(const std::string& nutrient) {
  static const std::map<std::string, NutrientKind> kKinds{
      {"fat", NutrientKind::Risk},          {"cholesterol", NutrientKind::Risk},
      {"sodium", NutrientKind::Risk},       {"calories", NutrientKind::Risk},
      {"protein", NutrientKind::Beneficial}, {"fiber", NutrientKind::Beneficial},
      {"vitamins", NutrientKind::Beneficial}};
  auto it = kKinds.find(nutrient);
  if (it == kKinds.end()) return std::nullopt;
  return it->second;
}

inline NutrientKind nutrient_kind_from_string(const std::string& s) {
  if (s == "risk") return NutrientKind::Risk;
  if (s == "beneficial") return NutrientKind::Beneficial;
  throw ConfigError("unknown nutrient kind '" + s + "' (expected risk or beneficial)");
}

/// Risk nutrients pass below 120% of the true value, beneficial ones at or
/// above 80%.
inline bool tolerance_compliance(double predicted, double truth, NutrientKind kind) {
  if (!(truth > 0)) throw DomainError("tolerance_compliance needs a positive true value");
  return kind == NutrientKind::Risk ? predicted < 1.20 * truth : predicted >= 0.80 * truth;
}

}  // namespace nutricast
