#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nutricast/core/error.hpp"

namespace nutricast {

struct NutrientValue {
  double value = 0.0;
  std::string unit;

  friend bool operator==(const NutrientValue&, const NutrientValue&) = default;
};

/// One product: image, ingredient statement, nutrient amounts, category.
struct FoodItem {
  std::string id;
  std::string image_path;
  std::string ingredients;
  std::map<std::string, NutrientValue> nutrients;
  std::string category;

  friend bool operator==(const FoodItem&, const FoodItem&) = default;
};

inline nlohmann::json to_json_line(const FoodItem& item) {
  nlohmann::json nutrients = nlohmann::json::object();
  for (const auto& [name, nv] : item.nutrients) nutrients[name] = {{"value", nv.value}, {"unit", nv.unit}};
  return {{"id", item.id},
          {"image_path", item.image_path},
          {"ingredients", item.ingredients},
          {"nutrients", nutrients},
          {"category", item.category}};
}

struct ManifestProblem {
  std::size_t line = 0;
  std::string message;
};

namespace detail {

inline FoodItem parse_manifest_line(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IngestionError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw IngestionError("line is not a JSON object");
  static const std::set<std::string> kFields{"id", "image_path", "ingredients", "nutrients", "category"};
  for (const auto& name : kFields)
    if (!j.contains(name)) throw IngestionError("missing field '" + name + "'");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!kFields.count(it.key())) throw IngestionError("unexpected field '" + it.key() + "'");
  for (const char* name : {"id", "image_path", "ingredients", "category"})
    if (!j[name].is_string()) throw IngestionError(std::string("field '") + name + "' must be a string");
  if (!j["nutrients"].is_object()) throw IngestionError("field 'nutrients' must be an object");

  FoodItem item;
  item.id = j["id"].get<std::string>();
  if (item.id.empty()) throw IngestionError("empty id");
  item.image_path = j["image_path"].get<std::string>();
  item.ingredients = j["ingredients"].get<std::string>();
  item.category = j["category"].get<std::string>();
  for (auto it = j["nutrients"].begin(); it != j["nutrients"].end(); ++it) {
    const auto& nv = it.value();
    if (!nv.is_object() || !nv.contains("value") || !nv.contains("unit") || !nv["value"].is_number() ||
        !nv["unit"].is_string()) {
      throw IngestionError("nutrient '" + it.key() + "' must be {\"value\": number, \"unit\": string}");
    }
    const double v = nv["value"].get<double>();
    if (!std::isfinite(v) || v < 0) {
      throw ValidationError("nutrient '" + it.key() + "' has invalid value " + nv["value"].dump());
    }
    item.nutrients[it.key()] = {v, nv["unit"].get<std::string>()};
  }
  return item;
}

}  // namespace detail

struct Manifest {
  std::vector<FoodItem> items;
  std::vector<ManifestProblem> problems;
  std::filesystem::path base_dir;  // relative image paths resolve against this

  std::filesystem::path image_path(const FoodItem& item) const {
    std::filesystem::path p(item.image_path);
    return p.is_absolute() ? p : base_dir / p;
  }
};

/// Reads a JSON-lines manifest. Blank lines are ignored. In strict mode any
/// problem throws (ValidationError for negative or non-finite nutrients,
/// IngestionError otherwise) with every offending line number listed.
inline Manifest load_manifest(const std::filesystem::path& path, bool strict = true) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  Manifest m;
  m.base_dir = path.parent_path();
  std::set<std::string> ids;
  std::map<std::string, std::string> units;
  bool only_validation = true;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      FoodItem item = detail::parse_manifest_line(line);
      if (!ids.insert(item.id).second) throw IngestionError("duplicate id '" + item.id + "'");
      for (const auto& [name, nv] : item.nutrients) {
        auto [it, fresh] = units.try_emplace(name, nv.unit);
        if (!fresh && it->second != nv.unit) {
          throw IngestionError("nutrient '" + name + "' has unit '" + nv.unit + "' but earlier lines use '" +
                               it->second + "'");
        }
      }
      m.items.push_back(std::move(item));
    } catch (const ValidationError& e) {
      m.problems.push_back({lineno, e.what()});
    } catch (const IngestionError& e) {
      only_validation = false;
      m.problems.push_back({lineno, e.what()});
    }
  }
  if (strict && !m.problems.empty()) {
    std::ostringstream oss;
    oss << path.string() << ": " << m.problems.size() << " bad line(s)";
    for (const auto& p : m.problems) oss << "\n  line " << p.line << ": " << p.message;
    if (only_validation) throw ValidationError(oss.str());
    throw IngestionError(oss.str());
  }
  return m;
}

inline void write_manifest(const std::vector<FoodItem>& items, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
  for (const auto& item : items) out << to_json_line(item).dump() << '\n';
}

/// Nutrient values for one channel, in item order; items lacking the nutrient
/// are reported through `present`.
inline std::vector<double> nutrient_column(const std::vector<FoodItem>& items, const std::string& nutrient,
                                           std::vector<bool>* present = nullptr) {
  std::vector<double> out;
  if (present) present->assign(items.size(), false);
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto it = items[i].nutrients.find(nutrient);
    if (it == items[i].nutrients.end()) {
      out.push_back(0.0);
      continue;
    }
    if (present) (*present)[i] = true;
    out.push_back(it->second.value);
  }
  return out;
}

}  // namespace nutricast
