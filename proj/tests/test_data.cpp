#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "nutricast/data/binning.hpp"
#include "nutricast/data/manifest.hpp"
#include "nutricast/data/split.hpp"
#include "nutricast/data/synth.hpp"
#include "support.hpp"

using namespace nutricast;
namespace fs = std::filesystem;

namespace {

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

std::string line(const std::string& id, double fat, const std::string& unit = "g") {
  return R"({"id":")" + id + R"(","image_path":"images/)" + id + R"(.png","ingredients":"milk, sugar",)" +
         R"("nutrients":{"fat":{"value":)" + std::to_string(fat) + R"(,"unit":")" + unit +
         R"("}},"category":"dairy"})";
}

std::vector<FoodItem> items(std::size_t n) {
  std::vector<FoodItem> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i].id = "item-" + std::to_string(i);
  return out;
}

}  // namespace

TEST(Binning, WorkedExample) {
  const auto r = bin_nutrient({0, 0, 1, 2, 3, 4});
  EXPECT_EQ(r.labels, (std::vector<int>{0, 0, 1, 1, 2, 2}));
  EXPECT_EQ(r.spec.class_count, 2u);
  EXPECT_EQ(r.spec.edges, (std::vector<double>{2, 4}));
  EXPECT_EQ(r.spec.representatives, (std::vector<double>{0, 1.5, 3.5}));
  EXPECT_EQ(r.spec.class_sizes, (std::vector<std::size_t>{2, 2, 2}));
}

TEST(Binning, AllZeros) {
  const auto r = bin_nutrient({0, 0, 0});
  EXPECT_EQ(r.spec.class_count, 0u);
  EXPECT_EQ(r.labels, (std::vector<int>{0, 0, 0}));
}

TEST(Binning, NoZerosNeedsOverride) {
  EXPECT_THROW(bin_nutrient({1, 2, 3}), ConfigError);
  const auto r = bin_nutrient({1, 2, 3, 4}, 2);
  EXPECT_EQ(r.labels, (std::vector<int>{1, 1, 2, 2}));
}

TEST(Binning, TieRunMovesToLowerClass) {
  // ideal cut after the second non-zero value falls inside the run of 2s
  const auto r = bin_nutrient({0, 0, 1, 2, 2, 3}, 2);
  EXPECT_EQ(r.labels, (std::vector<int>{0, 0, 1, 1, 1, 2}));
  EXPECT_EQ(r.spec.edges, (std::vector<double>{2, 3}));
}

TEST(Binning, ThresholdExcludesTopValues) {
  // 20 values 1..19 plus one zero; nearest rank of 0.95 * 20 = 19th value = 18
  std::vector<double> v{0};
  for (int i = 1; i <= 19; ++i) v.push_back(i);
  EXPECT_EQ(nearest_rank_quantile(v, 0.95), 18.0);
  const auto r = bin_nutrient(v, 3);
  EXPECT_EQ(r.labels.back(), kExcluded);
  EXPECT_EQ(std::count(r.labels.begin(), r.labels.end(), kExcluded), 1);
  EXPECT_EQ(r.spec.label_for(18.5), kExcluded);
  EXPECT_EQ(r.spec.label_for(0.0), 0);
  EXPECT_THROW(r.spec.label_for(-1.0), DomainError);
}

TEST(Binning, KFromZeroRatio) {
  // 2 zeros and 6 non-zeros: K = round(6 / 2) = 3
  const auto r = bin_nutrient({0, 0, 1, 2, 3, 4, 5, 6}, std::nullopt, 1.0);
  EXPECT_EQ(r.spec.class_count, 3u);
  EXPECT_EQ(r.labels, (std::vector<int>{0, 0, 1, 1, 2, 2, 3, 3}));
}

TEST(Binning, PropertiesOnRandomColumns) {
  Rng rng(77);
  std::size_t checked = 0;
  for (int t = 0; t < 300; ++t) {
    const auto v = testing_support::random_column(rng);
    const bool zeros = std::count(v.begin(), v.end(), 0.0) > 0;
    std::optional<std::size_t> k;
    if (!zeros || rng.bernoulli(0.3)) k = 1 + rng.below(10);
    const auto r = bin_nutrient(v, k);
    EXPECT_EQ(testing_support::binning_violation(v, r), "") << "trial " << t;
    ++checked;
  }
  EXPECT_EQ(checked, 300u);
}

TEST(Binning, JsonRoundTrip) {
  const auto r = bin_nutrient({0, 0, 1, 2, 3, 4}, std::nullopt, 0.95, "fat");
  const nlohmann::json j = r.spec;
  EXPECT_EQ(j.get<BinningSpec>(), r.spec);
  nlohmann::json broken = j;
  broken["edges"] = {1.0};
  EXPECT_THROW(broken.get<BinningSpec>(), ConfigError);
}

TEST(Manifest, ThreeLineFixture) {
  const auto dir = testing_support::scratch_dir("manifest-ok");
  const auto p = write_file(dir, "m.jsonl", line("a", 1.5) + "\n" + line("b", 0) + "\n\n" + line("c", 2) + "\n");
  const auto m = load_manifest(p);
  ASSERT_EQ(m.items.size(), 3u);
  EXPECT_EQ(m.items[0].nutrients.at("fat").value, 1.5);
  EXPECT_EQ(m.items[0].nutrients.at("fat").unit, "g");
  EXPECT_EQ(m.items[2].category, "dairy");
  EXPECT_EQ(m.image_path(m.items[1]), dir / "images/b.png");
}

TEST(Manifest, EmptyFileIsEmpty) {
  const auto dir = testing_support::scratch_dir("manifest-empty");
  EXPECT_TRUE(load_manifest(write_file(dir, "m.jsonl", "")).items.empty());
}

TEST(Manifest, MissingFieldReportsLine) {
  const auto dir = testing_support::scratch_dir("manifest-missing");
  std::string bad = line("b", 1);
  const std::string field = R"("ingredients":"milk, sugar",)";
  bad.erase(bad.find(field), field.size());
  const auto p = write_file(dir, "m.jsonl", line("a", 1) + "\n" + bad + "\n");
  try {
    load_manifest(p);
    FAIL() << "expected an ingestion error";
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("ingredients"), std::string::npos) << e.what();
  }
  const auto lenient = load_manifest(p, false);
  EXPECT_EQ(lenient.items.size(), 1u);
  ASSERT_EQ(lenient.problems.size(), 1u);
  EXPECT_EQ(lenient.problems[0].line, 2u);
}

TEST(Manifest, DuplicateNegativeAndMixedUnits) {
  const auto dir = testing_support::scratch_dir("manifest-bad");
  EXPECT_THROW(load_manifest(write_file(dir, "dup.jsonl", line("a", 1) + "\n" + line("a", 2) + "\n")), IngestionError);
  EXPECT_THROW(load_manifest(write_file(dir, "neg.jsonl", line("a", -1) + "\n")), ValidationError);
  EXPECT_THROW(load_manifest(write_file(dir, "units.jsonl", line("a", 1) + "\n" + line("b", 1, "mg") + "\n")),
               IngestionError);
  EXPECT_THROW(load_manifest(dir / "absent.jsonl"), IoError);
}

TEST(Split, SizesAndPartition) {
  const auto s = split_dataset(items(10), 0.7, 1);
  EXPECT_EQ(s.train_ids.size(), 7u);
  EXPECT_EQ(s.test_ids.size(), 3u);
  std::set<std::string> all(s.train_ids.begin(), s.train_ids.end());
  all.insert(s.test_ids.begin(), s.test_ids.end());
  EXPECT_EQ(all.size(), 10u);
  EXPECT_THROW(split_dataset(items(10), 1.0, 1), ConfigError);
  EXPECT_THROW(split_dataset({}, 0.7, 1), DomainError);
}

TEST(Split, SeedDeterminesAssignment) {
  const auto big = items(1000);
  const auto a = split_dataset(big, 0.7, 5), b = split_dataset(big, 0.7, 5), c = split_dataset(big, 0.7, 6);
  EXPECT_EQ(a.train_ids, b.train_ids);
  EXPECT_NE(a.train_ids, c.train_ids);
  const nlohmann::json j = a;
  EXPECT_EQ(j.get<SplitAssignment>().test_ids, a.test_ids);
}

TEST(Synth, PlantedRulesHold) {
  synth::SynthOptions opt;
  for (std::size_t i = 0; i < 200; ++i) {
    const auto p = synth::sample_product(3, i, opt);
    const auto item = synth::describe(p, i);
    double protein = 0;
    for (auto idx : p.ingredients) protein += synth::kIngredients[idx].protein;
    EXPECT_DOUBLE_EQ(item.nutrients.at("protein").value, protein);
    EXPECT_EQ(item.nutrients.at("sodium").value > 0, synth::contains(p, "salt"));
    EXPECT_EQ(item.nutrients.at("carbohydrates").value > 0, p.sticker);
    EXPECT_EQ(item.nutrients.at("calories").value == 0, p.tint == 0);
  }
}

TEST(Synth, LookAlikePairsShareAShape) {
  for (std::size_t i = 0; i < synth::kShapeCount; ++i)
    EXPECT_EQ(synth::kIngredients[i].shape, synth::kIngredients[i + 4].shape);
}

TEST(Synth, SameSeedSameBytes) {
  const auto a = testing_support::scratch_dir("synth-a"), b = testing_support::scratch_dir("synth-b");
  synth::generate(12, 7, a);
  synth::generate(12, 7, b);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  EXPECT_EQ(slurp(a / "manifest.jsonl"), slurp(b / "manifest.jsonl"));
  EXPECT_EQ(slurp(a / "images/synth-000011.png"), slurp(b / "images/synth-000011.png"));
  EXPECT_THROW(synth::generate(0, 7, a), DomainError);
  const auto m = load_manifest(a / "manifest.jsonl");
  EXPECT_EQ(m.items.size(), 12u);
  const Image img = read_image(m.image_path(m.items[0]).string());
  EXPECT_EQ(img.width, 64u);
}
