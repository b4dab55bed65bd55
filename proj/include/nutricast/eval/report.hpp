#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "nutricast/core/hash.hpp"
#include "nutricast/data/manifest.hpp"
#include "nutricast/data/split.hpp"
#include "nutricast/eval/auc.hpp"
#include "nutricast/eval/metrics.hpp"
#include "nutricast/train/checkpoint.hpp"
#include "nutricast/train/dataset.hpp"

namespace nutricast {

inline const std::string kUncategorized = "(uncategorized)";

/// One model output for one (item, nutrient) pair.
struct ItemPrediction {
  std::string id;
  std::string category;
  std::string nutrient;
  double truth = 0.0;
  int label = kExcluded;            // true class, kExcluded if filtered
  std::size_t predicted = 0;
  std::vector<double> confidences;
};

struct NutrientReport {
  std::string nutrient;
  std::size_t items = 0;            // evaluated (not excluded)
  std::size_t excluded = 0;
  std::optional<double> macro_auc;  // empty when fewer than two classes are present
  std::optional<double> weighted_auc;
  std::vector<std::pair<std::size_t, std::size_t>> skipped_pairs;
  double accuracy = 0.0;
  ErrorHistogram errors;
  std::optional<std::string> tolerance_kind;
  std::optional<double> tolerance_pass_rate;
  std::size_t tolerance_items = 0;
  std::size_t zero_truth_items = 0;
  bool low_confidence = false;
  std::map<std::string, NutrientReport> categories;
};

struct EvalOptions {
  std::size_t min_category_count = 30;
  std::map<std::string, NutrientKind> kind_overrides;
  bool breakdown = true;
};

struct EvalReport {
  std::string checkpoint_hash;
  std::string split_name;
  std::uint64_t split_seed = 0;
  double split_ratio = 0.0;
  std::size_t split_size = 0;
  std::map<std::string, NutrientReport> nutrients;
};

/// Metrics over a set of predictions for one nutrient.
inline NutrientReport summarize_nutrient(const std::string& nutrient, const std::vector<const ItemPrediction*>& preds,
                                         const BinningSpec& spec, const EvalOptions& opt, bool with_categories) {
  NutrientReport r;
  r.nutrient = nutrient;
  std::vector<std::vector<double>> conf;
  std::vector<std::size_t> labels, classes;
  std::vector<double> truths;
  std::size_t correct = 0;
  for (const auto* p : preds) {
    if (p->label == kExcluded) {
      ++r.excluded;
      continue;
    }
    conf.push_back(p->confidences);
    labels.push_back(static_cast<std::size_t>(p->label));
    classes.push_back(p->predicted);
    truths.push_back(p->truth);
    correct += p->predicted == static_cast<std::size_t>(p->label);
  }
  r.items = labels.size();
  r.low_confidence = r.items < opt.min_category_count;
  if (r.items == 0) return r;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.items);
  std::set<std::size_t> present(labels.begin(), labels.end());
  if (present.size() >= 2) {
    const OvoAuc auc = macro_auc_ovo(conf, labels);
    r.macro_auc = auc.macro;
    r.weighted_auc = auc.weighted;
    r.skipped_pairs = auc.skipped;
  }
  r.errors = error_distribution(classes, spec, truths);

  std::optional<NutrientKind> kind = nutrient_kind(nutrient);
  if (auto it = opt.kind_overrides.find(nutrient); it != opt.kind_overrides.end()) kind = it->second;
  if (kind) {
    r.tolerance_kind = to_string(*kind);
    std::size_t pass = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
      if (truths[i] == 0) {
        ++r.zero_truth_items;
        continue;
      }
      ++r.tolerance_items;
      pass += tolerance_compliance(spec.representative(classes[i]), truths[i], *kind);
    }
    if (r.tolerance_items) r.tolerance_pass_rate = static_cast<double>(pass) / static_cast<double>(r.tolerance_items);
  }

  if (with_categories) {
    std::map<std::string, std::vector<const ItemPrediction*>> groups;
    for (const auto* p : preds) groups[p->category.empty() ? kUncategorized : p->category].push_back(p);
    for (const auto& [cat, members] : groups) r.categories[cat] = summarize_nutrient(nutrient, members, spec, opt, false);
  }
  return r;
}

/// Per-category rows of a report (the category map of every nutrient).
inline std::map<std::string, std::map<std::string, NutrientReport>> category_breakdown(const EvalReport& report) {
  std::map<std::string, std::map<std::string, NutrientReport>> out;
  for (const auto& [nutrient, r] : report.nutrients)
    for (const auto& [cat, sub] : r.categories) out[cat][nutrient] = sub;
  return out;
}

inline EvalReport build_report(const std::vector<ItemPrediction>& preds, const std::map<std::string, BinningSpec>& bins,
                               const EvalOptions& opt = {}) {
  EvalReport report;
  std::map<std::string, std::vector<const ItemPrediction*>> by_nutrient;
  for (const auto& p : preds) by_nutrient[p.nutrient].push_back(&p);
  for (const auto& [nutrient, group] : by_nutrient) {
    auto spec = bins.find(nutrient);
    if (spec == bins.end()) throw ConfigError("no binning spec for nutrient '" + nutrient + "'");
    NutrientReport r = summarize_nutrient(nutrient, group, spec->second, opt, opt.breakdown);
    r.low_confidence = false;
    report.nutrients[nutrient] = std::move(r);
  }
  return report;
}

/// Runs the model over `items` for every nutrient head it has. Encoders run
/// once per item; the heads share the features.
template <typename T>
std::vector<ItemPrediction> predict_items(const NutrientModel<T>& model, const Manifest& manifest,
                                          const std::vector<FoodItem>& items,
                                          const std::map<std::string, BinningSpec>& bins) {
  const auto examples = prepare_examples(model, manifest, items, bins);
  std::vector<ItemPrediction> out;
  for (std::size_t k = 0; k < items.size(); ++k) {
    const auto& ex = examples[k];
    std::optional<Embedding<T>> img, txt;
    if (uses_image(model.variant)) img = model.embed_image(*ex.input.image);
    if (uses_text(model.variant)) txt = model.embed_text(*ex.input.tokens);
    const auto features = assemble_input(model.variant, img ? &*img : nullptr, txt ? &*txt : nullptr);
    for (const auto& [nutrient, spec] : bins) {
      if (!model.heads.count(nutrient)) continue;
      auto value = items[k].nutrients.find(nutrient);
      if (value == items[k].nutrients.end()) continue;
      const Prediction p = model.predict_from_features(nutrient, features);
      out.push_back({items[k].id, items[k].category, nutrient, value->second.value, ex.labels.at(nutrient), p.cls,
                     p.confidences});
    }
  }
  return out;
}

/// Evaluates a checkpoint on one side of its recorded split ("train" or "test").
template <typename T>
EvalReport evaluate(const Checkpoint<T>& ckpt, const Manifest& manifest, const std::string& split_name,
                    const EvalOptions& opt = {}, std::vector<ItemPrediction>* predictions = nullptr) {
  const std::vector<std::string>* ids = nullptr;
  if (split_name == "train") ids = &ckpt.split.train_ids;
  else if (split_name == "test") ids = &ckpt.split.test_ids;
  else if (split_name != "all") throw ConfigError("unknown split '" + split_name + "' (expected train, test or all)");
  std::vector<FoodItem> items = ids ? select_items(manifest.items, *ids) : manifest.items;
  if (items.empty()) throw DomainError("split '" + split_name + "' is empty");
  auto preds = predict_items(ckpt.model, manifest, items, ckpt.bins);
  EvalReport report = build_report(preds, ckpt.bins, opt);
  report.checkpoint_hash = hash_bytes(serialize_checkpoint(ckpt));
  report.split_name = split_name;
  report.split_seed = ckpt.split.seed;
  report.split_ratio = ckpt.split.ratio;
  report.split_size = items.size();
  if (predictions) *predictions = std::move(preds);
  return report;
}

inline nlohmann::json to_json(const ErrorHistogram& h) {
  nlohmann::json j = {{"total", h.total}};
  for (std::size_t b = 0; b < 4; ++b) {
    j["counts"][kBucketNames[b]] = h.counts[b];
    j["fractions"][kBucketNames[b]] = h.fraction(static_cast<ErrorBucket>(b));
  }
  return j;
}

inline nlohmann::json to_json(const NutrientReport& r) {
  auto opt = [](const auto& o) { return o ? nlohmann::json(*o) : nlohmann::json(); };
  nlohmann::json skipped = nlohmann::json::array();
  for (const auto& [i, j] : r.skipped_pairs) skipped.push_back({i, j});
  nlohmann::json j = {{"nutrient", r.nutrient},
                      {"items", r.items},
                      {"excluded", r.excluded},
                      {"macro_auc", opt(r.macro_auc)},
                      {"weighted_auc", opt(r.weighted_auc)},
                      {"skipped_pairs", skipped},
                      {"accuracy", r.accuracy},
                      {"error_buckets", to_json(r.errors)},
                      {"tolerance_kind", opt(r.tolerance_kind)},
                      {"tolerance_pass_rate", opt(r.tolerance_pass_rate)},
                      {"tolerance_items", r.tolerance_items},
                      {"zero_truth_items", r.zero_truth_items}};
  if (!r.categories.empty()) {
    nlohmann::json cats = nlohmann::json::object();
    for (const auto& [name, sub] : r.categories) {
      cats[name] = to_json(sub);
      cats[name]["low_confidence"] = sub.low_confidence;
    }
    j["categories"] = cats;
  }
  return j;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json nutrients = nlohmann::json::object();
  for (const auto& [name, nr] : r.nutrients) nutrients[name] = to_json(nr);
  return {{"checkpoint_hash", r.checkpoint_hash},
          {"split", {{"name", r.split_name}, {"seed", r.split_seed}, {"ratio", r.split_ratio}, {"size", r.split_size}}},
          {"nutrients", nutrients}};
}

/// Per-item CSV: id,category,nutrient,truth,label,predicted,predicted_value,relative_error
inline void write_predictions_csv(const std::vector<ItemPrediction>& preds,
                                  const std::map<std::string, BinningSpec>& bins, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "id,category,nutrient,truth,label,predicted,predicted_value,relative_error\n";
  char buf[256];
  for (const auto& p : preds) {
    const double v = bins.at(p.nutrient).representative(p.predicted);
    const auto rel = relative_error(v, p.truth);
    std::string cat = p.category;
    if (cat.find_first_of(",\"") != std::string::npos) {
      std::string q = "\"";
      for (char ch : cat) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      cat = q + "\"";
    }
    std::snprintf(buf, sizeof buf, "%.17g,%d,%zu,%.17g,", p.truth, p.label, p.predicted, v);
    out << p.id << ',' << cat << ',' << p.nutrient << ',' << buf;
    if (rel) {
      std::snprintf(buf, sizeof buf, "%.17g", *rel);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace nutricast
