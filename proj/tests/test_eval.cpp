#include <gtest/gtest.h>

#include <fstream>

#include "nutricast/eval/auc.hpp"
#include "nutricast/eval/plot.hpp"
#include "nutricast/eval/report.hpp"
#include "nutricast/validation/chemistry.hpp"
#include "support.hpp"

using namespace nutricast;
namespace fs = std::filesystem;

namespace {

BinningSpec two_class_spec() {
  // classes: 0 -> 0, 1 -> (0, 2] rep 1.5, 2 -> (2, 4] rep 3.5
  return bin_nutrient({0, 0, 1, 2, 3, 4}, std::nullopt, 0.95, "fat").spec;
}

ItemPrediction pred(const std::string& id, const std::string& cat, double truth, int label, std::size_t predicted,
                    std::vector<double> conf) {
  return {id, cat, "fat", truth, label, predicted, std::move(conf)};
}

FoodItem food(const std::string& id, double sodium) {
  FoodItem f;
  f.id = id;
  f.nutrients["sodium"] = {sodium, "mg"};
  f.nutrients["fat"] = {1.0, "g"};
  return f;
}

}  // namespace

TEST(Auc, BinaryPerfectReversedAndTied) {
  EXPECT_DOUBLE_EQ(auc_binary({0.1, 0.2, 0.8, 0.9}, {false, false, true, true}), 1.0);
  EXPECT_DOUBLE_EQ(auc_binary({0.9, 0.8, 0.2, 0.1}, {false, false, true, true}), 0.0);
  EXPECT_DOUBLE_EQ(auc_binary({0.5, 0.5, 0.5}, {true, false, true}), 0.5);
  EXPECT_THROW(auc_binary({0.1, 0.2}, {true, true}), DomainError);
}

TEST(Auc, MatchesPairCountingOracle) {
  Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    const auto inst = testing_support::random_auc_instance(rng);
    const auto got = macro_auc_ovo(inst.conf, inst.labels);
    EXPECT_NEAR(got.macro, testing_support::brute_force_macro_auc(inst.conf, inst.labels), 1e-12) << "trial " << t;
  }
}

TEST(Auc, AbsentClassPairsAreSkipped) {
  const std::vector<std::vector<double>> conf{{0.7, 0.2, 0.1}, {0.2, 0.7, 0.1}, {0.6, 0.3, 0.1}};
  const auto r = macro_auc_ovo(conf, {0, 1, 0});
  EXPECT_EQ(r.pairs.size(), 1u);
  EXPECT_EQ(r.skipped.size(), 2u);
  EXPECT_DOUBLE_EQ(r.macro, 1.0);
  EXPECT_THROW(macro_auc_ovo(conf, {1, 1, 1}), DomainError);
  EXPECT_THROW(macro_auc_ovo(conf, {0, 1}), DimensionError);
}

TEST(Metrics, RelativeErrorAndBuckets) {
  EXPECT_NEAR(*relative_error(1.1, 1.0), 0.1, 1e-12);
  EXPECT_EQ(*relative_error(0.0, 0.0), 0.0);
  EXPECT_FALSE(relative_error(1.0, 0.0).has_value());
  EXPECT_EQ(bucket_of(0.0999), ErrorBucket::Under10);
  EXPECT_EQ(bucket_of(0.10), ErrorBucket::Under30);
  EXPECT_EQ(bucket_of(0.2999), ErrorBucket::Under30);
  EXPECT_EQ(bucket_of(0.30), ErrorBucket::Over30);
  EXPECT_EQ(bucket_of(std::nullopt), ErrorBucket::Undefined);
}

TEST(Metrics, ToleranceBoundaries) {
  EXPECT_TRUE(tolerance_compliance(1.19, 1.0, NutrientKind::Risk));
  EXPECT_FALSE(tolerance_compliance(1.21, 1.0, NutrientKind::Risk));
  EXPECT_TRUE(tolerance_compliance(0.81, 1.0, NutrientKind::Beneficial));
  EXPECT_FALSE(tolerance_compliance(0.79, 1.0, NutrientKind::Beneficial));
  EXPECT_THROW(tolerance_compliance(1.0, 0.0, NutrientKind::Risk), DomainError);
  EXPECT_EQ(nutrient_kind("sodium"), NutrientKind::Risk);
  EXPECT_EQ(nutrient_kind("protein"), NutrientKind::Beneficial);
  EXPECT_FALSE(nutrient_kind("carbohydrates").has_value());
}

TEST(Report, SummarizeCountsAndTolerance) {
  const auto spec = two_class_spec();
  const std::vector<ItemPrediction> preds{
      pred("a", "dairy", 0.0, 0, 0, {0.8, 0.1, 0.1}),  pred("b", "snack", 1.5, 1, 1, {0.1, 0.8, 0.1}),
      pred("c", "snack", 3.0, 2, 1, {0.1, 0.5, 0.4}),  pred("d", "snack", 3.5, 2, 2, {0.1, 0.2, 0.7}),
      pred("e", "snack", 9.0, kExcluded, 2, {0, 0, 1})};
  EvalOptions opt;
  opt.min_category_count = 2;
  const auto report = build_report(preds, {{"fat", spec}}, opt);
  const auto& r = report.nutrients.at("fat");
  EXPECT_EQ(r.items, 4u);
  EXPECT_EQ(r.excluded, 1u);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.75);
  ASSERT_TRUE(r.macro_auc.has_value());
  std::vector<std::vector<double>> conf;
  std::vector<std::size_t> y;
  for (const auto& p : preds)
    if (p.label != kExcluded) conf.push_back(p.confidences), y.push_back(static_cast<std::size_t>(p.label));
  EXPECT_NEAR(*r.macro_auc, testing_support::brute_force_macro_auc(conf, y), 1e-12);
  // representatives: 0, 1.5, 1.5 (for truth 3.0), 3.5
  EXPECT_EQ(r.errors.counts[0], 3u);  // 0/0, exact, exact
  EXPECT_EQ(r.errors.counts[2], 1u);  // |1.5 - 3| / 3 = 0.5
  EXPECT_EQ(r.tolerance_kind, "risk");
  EXPECT_EQ(r.zero_truth_items, 1u);
  EXPECT_EQ(r.tolerance_items, 3u);
  EXPECT_DOUBLE_EQ(*r.tolerance_pass_rate, 1.0);  // under-prediction passes for a risk nutrient
  ASSERT_EQ(r.categories.size(), 2u);
  EXPECT_TRUE(r.categories.at("dairy").low_confidence);
  EXPECT_FALSE(r.categories.at("snack").low_confidence);
  EXPECT_EQ(r.categories.at("snack").excluded, 1u);

  EvalOptions beneficial = opt;
  beneficial.kind_overrides["fat"] = NutrientKind::Beneficial;
  const auto b = build_report(preds, {{"fat", spec}}, beneficial).nutrients.at("fat");
  EXPECT_NEAR(*b.tolerance_pass_rate, 2.0 / 3.0, 1e-12);

  const auto j = to_json(report);
  EXPECT_EQ(j["nutrients"]["fat"]["items"], 4);
  EXPECT_EQ(j["nutrients"]["fat"]["categories"]["dairy"]["low_confidence"], true);
  EXPECT_THROW(build_report(preds, {}, opt), ConfigError);
}

TEST(Report, SingleClassHasNoAuc) {
  const auto spec = two_class_spec();
  const std::vector<ItemPrediction> preds{pred("a", "", 1.0, 1, 1, {0.2, 0.6, 0.2}),
                                          pred("b", "", 2.0, 1, 2, {0.2, 0.3, 0.5})};
  const auto r = build_report(preds, {{"fat", spec}}).nutrients.at("fat");
  EXPECT_FALSE(r.macro_auc.has_value());
  EXPECT_TRUE(r.categories.count(kUncategorized));
}

TEST(Report, BucketChartIsSvg) {
  NutrientReport r;
  r.nutrient = "fat";
  r.errors.add(ErrorBucket::Under10);
  r.errors.add(ErrorBucket::Over30);
  const std::string svg = bucket_bars_svg(r);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_NE(svg.find("0.500"), std::string::npos);
}

TEST(Chemistry, ClosedForms) {
  EXPECT_DOUBLE_EQ(fat_content(3.0, 3.0, 2.0), 0.0);
  EXPECT_NEAR(fat_content(2.0, 1.0, 2.0), 0.1, 1e-15);
  EXPECT_NEAR(sodium_content(1.0), 39.07, 1e-12);
  EXPECT_NEAR(sodium_content(2.5), 97.675, 1e-12);
  EXPECT_DOUBLE_EQ(sodium_content(0.0), 0.0);
  EXPECT_THROW(fat_content(1.0, 2.0, 1.0), NegativeExtractError);
  EXPECT_THROW(fat_content(2.0, 1.0, 0.0), DomainError);
  EXPECT_THROW(sodium_content(-0.1), DomainError);
}

TEST(Chemistry, ThreeSourceSummary) {
  std::vector<FoodItem> items;
  std::map<ValueKey, double> model;
  std::vector<ChemRecord> chem;
  // model vs chem errors: 0.05, 0, 0.09, 0.099, 0.5
  const double model_vals[] = {105, 200, 109, 109.9, 150};
  for (int i = 0; i < 5; ++i) {
    const std::string id = "p" + std::to_string(i);
    items.push_back(food(id, 100));
    model[{id, "sodium"}] = model_vals[i];
    chem.push_back({id, "sodium", i == 1 ? 200.0 : 100.0, 2.0, "titration", ""});
  }
  chem.push_back({"p0", "fat", 1.0, 0.1, "soxhlet", ""});
  chem.push_back({"ghost", "sodium", 1.0, 0.1, "titration", ""});
  const auto r = three_source_report(items, model, chem);
  EXPECT_EQ(r.rows.size(), 5u);
  EXPECT_EQ(r.under_10, 4u);
  EXPECT_DOUBLE_EQ(r.summary(), 0.8);
  ASSERT_EQ(r.unmatched.size(), 1u);
  EXPECT_EQ(r.unmatched[0].id, "ghost");
  EXPECT_EQ(r.excluded_nutrients, std::vector<std::string>{"fat"});

  ThreeSourceOptions with_fat;
  with_fat.include_fat = true;
  const auto rf = three_source_report(items, model, chem, with_fat);
  EXPECT_EQ(rf.unmatched.size(), 2u);  // p0/fat has no model estimate

  EXPECT_THROW(three_source_report(items, {}, chem), DomainError);
  auto mismatched = chem;
  mismatched[0].unit = "g";
  EXPECT_THROW(three_source_report(items, model, mismatched), ValidationError);

  const auto dir = testing_support::scratch_dir("three-source");
  write_three_source_csv(r, dir / "out.csv");
  std::ifstream in(dir / "out.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "id,nutrient,bfpd_value,model_value,chem_mean,chem_sd,relative_error,under_10,radius");
  std::size_t under = 0, rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    under += line.find(",1,2") != std::string::npos;
  }
  EXPECT_EQ(rows, 5u);
  EXPECT_EQ(under, 4u);
  EXPECT_DOUBLE_EQ(to_json(r)["summary"]["fraction_under_10"].get<double>(), 0.8);
}

TEST(Chemistry, CsvLoading) {
  const auto dir = testing_support::scratch_dir("chem-csv");
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream(dir / name, std::ios::binary) << text;
    return dir / name;
  };
  const auto ok = load_chem_csv(
      write("ok.csv", "id,nutrient,chem_mean,chem_sd,method\na,sodium,39.07,1.5,\"titration, Mohr\"\n\nb,fat,2,0,soxhlet\n"));
  ASSERT_EQ(ok.size(), 2u);
  EXPECT_EQ(ok[0].method, "titration, Mohr");
  EXPECT_DOUBLE_EQ(ok[0].chem_mean, 39.07);
  const auto unit = load_chem_csv(write("unit.csv", "id,nutrient,chem_mean,chem_sd,method,unit\na,sodium,1,0,t,mg\n"));
  EXPECT_EQ(unit[0].unit, "mg");

  EXPECT_THROW(load_chem_csv(dir / "missing.csv"), IoError);
  EXPECT_THROW(load_chem_csv(write("empty.csv", "")), IngestionError);
  EXPECT_THROW(load_chem_csv(write("hdr.csv", "id,nutrient,mean\n")), IngestionError);
  EXPECT_THROW(load_chem_csv(write("num.csv", "id,nutrient,chem_mean,chem_sd,method\na,fat,x1,0,m\n")), IngestionError);
  EXPECT_THROW(load_chem_csv(write("neg.csv", "id,nutrient,chem_mean,chem_sd,method\na,fat,1,-1,m\n")), ValidationError);
  EXPECT_THROW(load_chem_csv(write("dup.csv", "id,nutrient,chem_mean,chem_sd,method\na,fat,1,0,m\na,fat,2,0,m\n")),
               IngestionError);
  try {
    load_chem_csv(write("short.csv", "id,nutrient,chem_mean,chem_sd,method\na,fat,1,0,m\nb,fat,1\n"));
    FAIL() << "expected an ingestion error";
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}
