// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "nutricast/nutricast.hpp"
#include "support.hpp"

using namespace nutricast;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

const Manifest& synth_500() {
  static const Manifest m = [] {
    const auto dir = testing_support::scratch_dir("acceptance-synth");
    synth::generate(500, 7, dir);
    return load_manifest(dir / "manifest.jsonl");
  }();
  return m;
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

double auc_of(const EvalReport& r, const std::string& nutrient) {
  return r.nutrients.at(nutrient).macro_auc.value_or(-1.0);
}

// Full VL model, both heads' CE plus clip loss, double precision.
Outcome gradient_fidelity() {
  const auto& m = synth_500();
  TrainConfig cfg;
  cfg.variant = Variant::VL;
  cfg.nutrients = {"fat", "calories"};
  cfg.seed = 1;
  cfg.min_token_frequency = 1;
  auto c = initialize<double>(m, ModelConfig::tiny(), cfg);
  // the head output layer starts at zero; move it so every path carries gradient
  Rng rng(99);
  for (auto& [name, p] : c.model.params)
    if (name.rfind("heads.", 0) == 0)
      for (double& v : p.value.values())
        if (v == 0.0) v = rng.normal(0.0, 0.2);
  const auto examples = prepare_examples(c.model, m, std::vector<FoodItem>(m.items.begin(), m.items.begin() + 4), c.bins);
  std::vector<const Example<double>*> batch;
  for (const auto& ex : examples) batch.push_back(&ex);
  const auto& model = c.model;
  auto build = [&](Tape<double>& t, ParameterStore<double>& p) {
    return detail::joint_batch_loss(t, p, model, batch, cfg.nutrients, 1.0);
  };
  GradCheckOptions opt;
  opt.samples = 320;
  ParameterStore<double> params = c.model.params;
  const auto r = grad_check(params, build, opt);
  const std::size_t compared = r.coordinates - r.near_zero;
  return {compared >= 200 && r.max_relative_error < 1e-4,
          std::to_string(compared) + " coordinates compared (" + std::to_string(r.near_zero) +
              " more with both gradients below 1e-7), max relative error " + fmt(r.max_relative_error, 3) + " at " +
              r.worst_parameter};
}

Outcome loss_identities() {
  bool ok = true;
  SimilarityMatrix one{Tensor<double>::matrix(1, 1, 0.9), 0.07};
  ok &= std::abs(info_nce_image(one)) <= 1e-9 && std::abs(info_nce_text(one)) <= 1e-9;
  for (std::size_t n : {2u, 8u, 32u}) {
    SimilarityMatrix s{Tensor<double>::matrix(n, n, 0.3), 0.07};
    ok &= std::abs(clip_loss(s) - std::log(static_cast<double>(n))) <= 1e-6;
  }
  Rng rng(12);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.below(12));
    SimilarityMatrix s{Tensor<double>::matrix(n, n), rng.uniform(0.01, 1.0)};
    for (double& v : s.values.values()) v = rng.uniform(-1.0, 1.0);
    ok &= clip_loss(s) == clip_loss(s.transposed());
  }
  for (std::size_t m : {2u, 5u, 11u}) {
    std::vector<double> u(m, 1.0 / static_cast<double>(m));
    for (std::size_t c = 0; c < m; ++c) ok &= std::abs(cross_entropy(u, c) - std::log(static_cast<double>(m))) <= 1e-9;
  }
  return {ok, "N=1, equal similarities, transpose symmetry on 100 matrices, uniform cross-entropy"};
}

Outcome auc_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2024);
  double worst = 0;
  std::size_t tied = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto inst = testing_support::random_auc_instance(rng);
    std::set<double> distinct;
    for (const auto& row : inst.conf) distinct.insert(row[0]);
    tied += distinct.size() < inst.conf.size();
    const double got = macro_auc_ovo(inst.conf, inst.labels).macro;
    worst = std::max(worst, std::abs(got - testing_support::brute_force_macro_auc(inst.conf, inst.labels)));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst <= 1e-9 && secs < 60, "1000 instances (" + std::to_string(tied) + " with ties), max deviation " +
                                          fmt(worst, 3) + ", " + fmt(secs, 3) + " s"};
}

Outcome binning_properties() {
  const auto worked = bin_nutrient({0, 0, 1, 2, 3, 4});
  bool ok = worked.labels == std::vector<int>{0, 0, 1, 1, 2, 2};
  Rng rng(4242);
  std::size_t violations = 0;
  std::string first;
  for (int t = 0; t < 1000; ++t) {
    const auto v = testing_support::random_column(rng);
    const bool zeros = std::count(v.begin(), v.end(), 0.0) > 0;
    std::optional<std::size_t> k;
    if (!zeros) k = 1 + rng.below(8);
    const auto why = testing_support::binning_violation(v, bin_nutrient(v, k));
    if (!why.empty()) {
      if (first.empty()) first = "column " + std::to_string(t) + ": " + why;
      ++violations;
    }
  }
  ok &= violations == 0;
  return {ok, std::string("worked example ") + (worked.labels == std::vector<int>{0, 0, 1, 1, 2, 2} ? "exact" : "WRONG") +
                  ", " + std::to_string(violations) + "/1000 columns violate" + (first.empty() ? "" : " (" + first + ")")};
}

Outcome learnability() {
  const auto& m = synth_500();
  TrainConfig cfg;
  cfg.variant = Variant::VL;
  cfg.nutrients = {"fat"};
  cfg.batch_size = 32;
  cfg.epochs = 50;
  cfg.lr_encoders = 1e-7;
  cfg.seed = 1;
  const auto t0 = std::chrono::steady_clock::now();
  const auto c = train<float>(m, ModelConfig::tiny(), cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double tr = auc_of(evaluate(c, m, "train"), "fat"), te = auc_of(evaluate(c, m, "test"), "fat");
  return {tr >= 0.95 && te >= 0.85 && secs <= 600,
          "fat: train " + fmt(tr) + ", held-out " + fmt(te) + ", training " + fmt(secs, 3) + " s"};
}

Outcome variant_ordering() {
  const auto& m = synth_500();
  auto test_auc = [&](Variant v, const std::string& nutrient, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.variant = v;
    cfg.nutrients = {nutrient};
    cfg.batch_size = 32;
    cfg.epochs = 50;
    cfg.seed = seed;
    return auc_of(evaluate(train<float>(m, ModelConfig::tiny(), cfg), m, "test"), nutrient);
  };
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const double vf = test_auc(Variant::VF, "fat", seed), lf = test_auc(Variant::LF, "fat", seed),
                 vlf = test_auc(Variant::VLF, "fat", seed);
    const double img_vf = test_auc(Variant::VF, "calories", seed), img_lf = test_auc(Variant::LF, "calories", seed);
    const double txt_vf = test_auc(Variant::VF, "sodium", seed), txt_lf = test_auc(Variant::LF, "sodium", seed);
    const bool s = vlf >= std::max(vf, lf) - 0.02 && img_vf >= img_lf + 0.1 && txt_lf >= txt_vf + 0.1;
    ok &= s;
    detail += "\n    seed " + std::to_string(seed) + ": fat VF " + fmt(vf, 3) + " LF " + fmt(lf, 3) + " VLF " + fmt(vlf, 3) +
              "; calories VF " + fmt(img_vf, 3) + " LF " + fmt(img_lf, 3) + "; sodium VF " + fmt(txt_vf, 3) + " LF " +
              fmt(txt_lf, 3) + (s ? "" : "  <- fails");
  }
  return {ok, "3 seeds" + detail};
}

Outcome localization() {
  const auto& m = synth_500();
  const synth::SynthOptions so;

  // Glyph: the carbohydrate value is set by a sticker in one grid cell.
  TrainConfig vl;
  vl.variant = Variant::VL;
  vl.nutrients = {"carbohydrates"};
  vl.lr_encoders = 1e-3;
  vl.batch_size = 32;
  vl.epochs = 15;
  vl.seed = 1;
  const auto cv = train<float>(m, ModelConfig::tiny(), vl);
  std::size_t glyph_hits = 0, glyph_n = 0;
  for (std::size_t i = 0; glyph_n < 50; ++i) {
    const auto p = synth::sample_product(1000, i, so);
    if (!p.sticker) continue;
    ItemInput<float> other;
    other.tokens = cv.model.prepare_text(synth::statement_of(p));
    const auto h = gradcam(cv.model, cv.model.prepare_image(synth::render_product(p, 1000, i, so)), other,
                           "carbohydrates", 1);
    glyph_hits += h.argmax() == p.sticker_cell;
    ++glyph_n;
  }

  // Token: sodium is non-zero exactly when salt is listed.
  TrainConfig lf;
  lf.variant = Variant::LF;
  lf.nutrients = {"sodium"};
  lf.batch_size = 32;
  lf.epochs = 30;
  lf.seed = 3;
  const auto cl = train<float>(m, ModelConfig::tiny(), lf);
  std::size_t token_hits = 0, token_n = 0;
  for (std::size_t i = 0; token_n < 50; ++i) {
    const auto p = synth::sample_product(2000, i, so);
    if (!synth::contains(p, "salt")) continue;
    const auto words = text_saliency(cl.model, synth::statement_of(p), ItemInput<float>{}, "sodium", 1).words();
    const auto best = std::max_element(words.begin(), words.end(),
                                       [](const auto& a, const auto& b) { return a.weight < b.weight; });
    token_hits += best->token == "salt";
    ++token_n;
  }
  return {glyph_hits >= 45 && token_hits >= 45, "gradcam argmax on the sticker " + std::to_string(glyph_hits) +
                                                    "/50, salt token max saliency " + std::to_string(token_hits) + "/50"};
}

Outcome closed_forms() {
  bool ok = fat_content(12.5, 12.5, 3.0) == 0.0 && fat_content(0.0, 0.0, 1.0) == 0.0;
  ok &= sodium_content(1.0) == 39.07;
  ok &= tolerance_compliance(1.19, 1.0, NutrientKind::Risk) && !tolerance_compliance(1.21, 1.0, NutrientKind::Risk);
  ok &= tolerance_compliance(0.81, 1.0, NutrientKind::Beneficial) &&
        !tolerance_compliance(0.79, 1.0, NutrientKind::Beneficial);
  return {ok, "fat_content(Wa=Wb) = 0, sodium_content(1) = 39.07, tolerance boundaries 1.19/1.21 and 0.81/0.79"};
}

Outcome reproducibility() {
  const auto& full = synth_500();
  Manifest m = full;
  m.items.resize(80);
  TrainConfig cfg;
  cfg.variant = Variant::VL;
  cfg.nutrients = {"fat", "sodium"};
  cfg.batch_size = 16;
  cfg.epochs = 2;
  cfg.lr_encoders = 1e-4;
  cfg.seed = 5;
  const auto a = train<float>(m, ModelConfig::tiny(), cfg), b = train<float>(m, ModelConfig::tiny(), cfg);
  const std::string bytes_a = serialize_checkpoint(a), bytes_b = serialize_checkpoint(b);
  const bool same_ckpt = bytes_a == bytes_b;
  const bool same_report = to_json(evaluate(a, m, "test")).dump() == to_json(evaluate(b, m, "test")).dump();

  const auto dir = testing_support::scratch_dir("acceptance-ckpt");
  save_checkpoint(a, dir / "model.ckpt");
  const auto back = load_checkpoint<float>(dir / "model.ckpt");
  const std::vector<FoodItem> twenty(m.items.begin(), m.items.begin() + 20);
  const auto pa = predict_items(a.model, m, twenty, a.bins), pb = predict_items(back.model, m, twenty, back.bins);
  bool same_preds = pa.size() == pb.size() && pa.size() == 40;
  for (std::size_t i = 0; same_preds && i < pa.size(); ++i)
    same_preds = pa[i].predicted == pb[i].predicted && pa[i].confidences == pb[i].confidences;
  return {same_ckpt && same_report && same_preds,
          std::string("checkpoint bytes ") + (same_ckpt ? "identical" : "DIFFER") + ", eval report " +
              (same_report ? "identical" : "DIFFERS") + ", 20-item round trip " + (same_preds ? "bitwise" : "DIFFERS")};
}

Outcome chance_level() {
  const auto& m = synth_500();
  bool ok = true;
  std::string detail = "fresh VL, carbohydrates:";
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    TrainConfig cfg;
    cfg.variant = Variant::VL;
    cfg.nutrients = {"carbohydrates"};
    cfg.seed = seed;
    const auto c = initialize<float>(m, ModelConfig::tiny(), cfg);
    const double auc = auc_of(evaluate(c, m, "all"), "carbohydrates");
    ok &= std::abs(auc - 0.5) <= 0.1;
    detail += " " + fmt(auc, 3);
  }
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, gradient_fidelity}, {2, loss_identities}, {3, auc_oracle}, {4, binning_properties},
      {5, learnability},      {6, variant_ordering}, {7, localization}, {8, closed_forms},
      {9, reproducibility},   {10, chance_level}};
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d: %s  %s  [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
