#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nutricast/core/error.hpp"
#include "nutricast/data/manifest.hpp"
#include "nutricast/eval/metrics.hpp"

namespace nutricast {

class NegativeExtractError : public DomainError {
 public:
  explicit NegativeExtractError(const std::string& what) : DomainError(what) {}
};

/// Fat content (g/100g) from the extraction weights:
///   C = 0.05 * (W_a - W_b) * W_f
/// W_a: flask with extract, W_b: empty flask, W_f: freeze-dried sample weight.
/// The expression is kept as published; its units only balance under an
/// implicit percentage convention.
inline double fat_content(double w_a, double w_b, double w_f) {
  if (!std::isfinite(w_a) || !std::isfinite(w_b) || !std::isfinite(w_f)) throw DomainError("fat_content: non-finite weight");
  if (w_b < 0) throw DomainError("fat_content: negative flask weight");
  if (w_a < w_b) throw NegativeExtractError("fat_content: flask with extract weighs less than the empty flask");
  if (!(w_f > 0)) throw DomainError("fat_content: freeze-dried weight must be positive");
  return 0.05 * (w_a - w_b) * w_f;
}

/// Sodium content (g/100g) from the titrant volume V in mL: C = 39.07 * V.
inline double sodium_content(double titrant_ml) {
  if (!std::isfinite(titrant_ml) || titrant_ml < 0) throw DomainError("sodium_content: titrant volume must be >= 0");
  return 39.07 * titrant_ml;
}

struct ChemRecord {
  std::string id;
  std::string nutrient;
  double chem_mean = 0.0;
  double chem_sd = 0.0;
  std::string method;
  std::string unit;  // optional column; checked against the manifest when present
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') field += '"', ++i;
      else if (c == '"') quoted = false;
      else field += c;
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

inline double parse_number(const std::string& s, std::size_t lineno, const char* column) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v)) {
    throw IngestionError("chem CSV line " + std::to_string(lineno) + ": bad " + column + " '" + s + "'");
  }
  return v;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Reads `id,nutrient,chem_mean,chem_sd,method[,unit]`.
inline std::vector<ChemRecord> load_chem_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open chem CSV '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw IngestionError("chem CSV '" + path.string() + "' is empty");
  const auto header = detail::split_csv_line(line);
  const std::vector<std::string> want{"id", "nutrient", "chem_mean", "chem_sd", "method"};
  const bool has_unit = header.size() == 6 && header[5] == "unit";
  if (!(header.size() == 5 || has_unit) || !std::equal(want.begin(), want.end(), header.begin())) {
    throw IngestionError("chem CSV header must be id,nutrient,chem_mean,chem_sd,method[,unit]");
  }
  std::vector<ChemRecord> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != header.size()) {
      throw IngestionError("chem CSV line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                           " fields, got " + std::to_string(f.size()));
    }
    ChemRecord r{f[0], f[1], detail::parse_number(f[2], lineno, "chem_mean"),
                 detail::parse_number(f[3], lineno, "chem_sd"), f[4], has_unit ? f[5] : std::string()};
    if (r.chem_sd < 0) throw ValidationError("chem CSV line " + std::to_string(lineno) + ": chem_sd must be >= 0");
    if (r.chem_mean < 0) throw ValidationError("chem CSV line " + std::to_string(lineno) + ": chem_mean must be >= 0");
    if (!seen.emplace(r.id, r.nutrient).second) {
      throw IngestionError("chem CSV line " + std::to_string(lineno) + ": duplicate record for " + r.id + "/" + r.nutrient);
    }
    out.push_back(std::move(r));
  }
  return out;
}

struct ComparisonRow {
  std::string id;
  std::string nutrient;
  double bfpd_value = 0.0;
  double model_value = 0.0;
  double chem_mean = 0.0;
  double chem_sd = 0.0;
  std::optional<double> relative_error;  // model vs chem
};

struct Unmatched {
  std::string id;
  std::string nutrient;
  std::string reason;
};

struct ThreeSourceReport {
  std::vector<ComparisonRow> rows;
  std::vector<Unmatched> unmatched;
  std::vector<std::string> excluded_nutrients;
  std::size_t under_10 = 0;

  /// Fraction of rows whose model-vs-chem relative error is below 10%.
  double summary() const { return rows.empty() ? 0.0 : static_cast<double>(under_10) / static_cast<double>(rows.size()); }
};

struct ThreeSourceOptions {
  bool include_fat = false;
};

using ValueKey = std::pair<std::string, std::string>;  // (id, nutrient)

/// Joins database values (manifest), model estimates and chemical analysis
/// on (id, nutrient). Records missing from any source are listed as unmatched.
inline ThreeSourceReport three_source_report(const std::vector<FoodItem>& items,
                                             const std::map<ValueKey, double>& model_values,
                                             const std::vector<ChemRecord>& chem, const ThreeSourceOptions& opt = {}) {
  std::map<std::string, const FoodItem*> by_id;
  for (const auto& it : items) by_id[it.id] = &it;
  ThreeSourceReport report;
  if (!opt.include_fat) report.excluded_nutrients.push_back("fat");
  for (const auto& c : chem) {
    if (!opt.include_fat && c.nutrient == "fat") continue;
    auto item = by_id.find(c.id);
    if (item == by_id.end()) {
      report.unmatched.push_back({c.id, c.nutrient, "not in manifest"});
      continue;
    }
    auto nv = item->second->nutrients.find(c.nutrient);
    if (nv == item->second->nutrients.end()) {
      report.unmatched.push_back({c.id, c.nutrient, "manifest item has no value for this nutrient"});
      continue;
    }
    if (!c.unit.empty() && c.unit != nv->second.unit) {
      throw ValidationError("chem record " + c.id + "/" + c.nutrient + " is in '" + c.unit + "' but the manifest uses '" +
                            nv->second.unit + "'");
    }
    auto mv = model_values.find({c.id, c.nutrient});
    if (mv == model_values.end()) {
      report.unmatched.push_back({c.id, c.nutrient, "no model estimate"});
      continue;
    }
    ComparisonRow row{c.id, c.nutrient, nv->second.value, mv->second, c.chem_mean, c.chem_sd,
                      relative_error(mv->second, c.chem_mean)};
    if (row.relative_error && *row.relative_error < 0.10) ++report.under_10;
    report.rows.push_back(std::move(row));
  }
  if (report.rows.empty()) throw DomainError("three-source join is empty");
  return report;
}

/// Row CSV; the `radius` column is the chemical analysis SD, used as the
/// sphere size in a three-axis scatter.
inline void write_three_source_csv(const ThreeSourceReport& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "id,nutrient,bfpd_value,model_value,chem_mean,chem_sd,relative_error,under_10,radius\n";
  for (const auto& row : r.rows) {
    out << detail::csv_field(row.id) << ',' << detail::csv_field(row.nutrient) << ',' << detail::fmt(row.bfpd_value)
        << ',' << detail::fmt(row.model_value) << ',' << detail::fmt(row.chem_mean) << ',' << detail::fmt(row.chem_sd)
        << ',' << (row.relative_error ? detail::fmt(*row.relative_error) : std::string()) << ','
        << (row.relative_error && *row.relative_error < 0.10 ? 1 : 0) << ',' << detail::fmt(row.chem_sd) << '\n';
  }
}

inline nlohmann::json to_json(const ThreeSourceReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"id", row.id},
                    {"nutrient", row.nutrient},
                    {"bfpd_value", row.bfpd_value},
                    {"model_value", row.model_value},
                    {"chem_mean", row.chem_mean},
                    {"chem_sd", row.chem_sd},
                    {"relative_error", row.relative_error ? nlohmann::json(*row.relative_error) : nlohmann::json()}});
  }
  nlohmann::json unmatched = nlohmann::json::array();
  for (const auto& u : r.unmatched) unmatched.push_back({{"id", u.id}, {"nutrient", u.nutrient}, {"reason", u.reason}});
  return {{"rows", rows},
          {"unmatched", unmatched},
          {"excluded_nutrients", r.excluded_nutrients},
          {"summary", {{"rows", r.rows.size()}, {"under_10", r.under_10}, {"fraction_under_10", r.summary()}}}};
}

}  // namespace nutricast
