#include <gtest/gtest.h>

#include "nutricast/data/synth.hpp"
#include "nutricast/eval/report.hpp"
#include "nutricast/interpret/gradcam.hpp"
#include "nutricast/interpret/overlay.hpp"
#include "nutricast/interpret/saliency.hpp"
#include "nutricast/train/trainer.hpp"
#include "support.hpp"

using namespace nutricast;
namespace fs = std::filesystem;

namespace {

const Manifest& small_manifest() {
  static const Manifest m = [] {
    const auto dir = testing_support::scratch_dir("train-synth");
    synth::generate(60, 11, dir);
    return load_manifest(dir / "manifest.jsonl");
  }();
  return m;
}

TrainConfig quick_config(Variant v, std::uint64_t seed = 2) {
  TrainConfig cfg;
  cfg.variant = v;
  cfg.nutrients = {"calories", "sodium"};
  cfg.batch_size = 16;
  cfg.epochs = 6;
  cfg.seed = seed;
  cfg.min_token_frequency = 1;
  return cfg;
}

double epoch_mean(const std::vector<LossRecord>& h, std::size_t epoch) {
  double s = 0;
  std::size_t n = 0;
  for (const auto& r : h)
    if (r.epoch == epoch) s += r.loss, ++n;
  return s / static_cast<double>(n);
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitwise) {
  const auto& m = small_manifest();
  const auto c = train<float>(m, ModelConfig::tiny(), quick_config(Variant::VF));
  const std::string bytes = serialize_checkpoint(c);
  const auto back = deserialize_checkpoint<float>(bytes);
  EXPECT_EQ(serialize_checkpoint(back), bytes);
  EXPECT_EQ(back.bins, c.bins);
  EXPECT_EQ(back.train, c.train);

  const auto items = select_items(m.items, c.split.test_ids);
  const auto a = predict_items(c.model, m, items, c.bins), b = predict_items(back.model, m, items, back.bins);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].confidences, b[i].confidences);

  const auto dir = testing_support::scratch_dir("ckpt");
  save_checkpoint(c, dir / "sub" / "m.ckpt");
  EXPECT_EQ(serialize_checkpoint(load_checkpoint<float>(dir / "sub" / "m.ckpt")), bytes);
  EXPECT_THROW(load_checkpoint<float>(dir / "absent.ckpt"), IoError);
}

TEST(Checkpoint, CorruptionIsReportedWithOffset) {
  const auto c = initialize<float>(small_manifest(), ModelConfig::tiny(), quick_config(Variant::LF));
  const std::string bytes = serialize_checkpoint(c);

  try {
    deserialize_checkpoint<float>(bytes.substr(0, bytes.size() / 2));
    FAIL() << "truncated checkpoint accepted";
  } catch (const ParseError& e) {
    EXPECT_LE(e.offset(), bytes.size() / 2);
  }
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x5A;
  EXPECT_THROW(deserialize_checkpoint<float>(flipped), ParseError);
  std::string magic = bytes;
  magic[0] = 'X';
  try {
    deserialize_checkpoint<float>(magic);
    FAIL() << "bad magic accepted";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  // float tensors load into a double model unchanged
  const auto wide = deserialize_checkpoint<double>(bytes);
  EXPECT_EQ(wide.model.params.at("text.proj").value[3], static_cast<double>(c.model.params.at("text.proj").value[3]));
}

TEST(EmbeddingCache, DetectsStaleEncoders) {
  const auto& m = small_manifest();
  auto c = initialize<float>(m, ModelConfig::tiny(), quick_config(Variant::VLF));
  const auto examples = prepare_examples(c.model, m, m.items, c.bins);
  const auto cache = precompute_embeddings(c.model, examples);
  EXPECT_EQ(cache.size(), m.items.size());
  EXPECT_NO_THROW(cache.check(c.model));
  EXPECT_EQ(cache.features(m.items[0].id).size(), 2 * c.model.config.projection_dim);

  auto other = initialize<float>(m, ModelConfig::tiny(), quick_config(Variant::VLF, 3));
  EXPECT_THROW(cache.check(other.model), StaleCacheError);
  c.model.params.at("image.patch_proj.w").value[0] += 1.0f;
  EXPECT_THROW(cache.check(c.model), StaleCacheError);

  auto vl = initialize<float>(m, ModelConfig::tiny(), quick_config(Variant::VL));
  EXPECT_THROW(precompute_embeddings(vl.model, examples), ContractError);
}

TEST(Training, SameSeedSameBytesAndLossFalls) {
  const auto& m = small_manifest();
  auto cfg = quick_config(Variant::VL);
  cfg.epochs = 3;
  cfg.lr_encoders = 1e-4;
  const auto a = train<float>(m, ModelConfig::tiny(), cfg), b = train<float>(m, ModelConfig::tiny(), cfg);
  EXPECT_EQ(serialize_checkpoint(a), serialize_checkpoint(b));
  EXPECT_EQ(to_json(evaluate(a, m, "test")).dump(), to_json(evaluate(b, m, "test")).dump());

  auto frozen = quick_config(Variant::VLF);
  frozen.epochs = 30;
  const auto f = train<float>(m, ModelConfig::tiny(), frozen);
  EXPECT_LT(epoch_mean(f.history, 30), epoch_mean(f.history, 1));
}

TEST(Training, RejectsUnusableConfigs) {
  const auto& m = small_manifest();
  auto cfg = quick_config(Variant::VF);
  cfg.batch_size = 0;
  EXPECT_THROW(train<float>(m, ModelConfig::tiny(), cfg), ConfigError);
  cfg = quick_config(Variant::VF);
  cfg.batch_size = 1000;
  cfg.allow_short_batch = false;
  EXPECT_THROW(train<float>(m, ModelConfig::tiny(), cfg), TrainingError);
  cfg = quick_config(Variant::VF);
  cfg.nutrients = {"vitamins"};
  EXPECT_ANY_THROW(train<float>(m, ModelConfig::tiny(), cfg));
}

TEST(Interpret, GradcamShapeAndRange) {
  const auto& m = small_manifest();
  auto c = initialize<float>(m, ModelConfig::tiny(), quick_config(Variant::VLF));
  // non-zero head weights so the gradient is not identically zero
  Rng rng(4);
  for (auto& [name, p] : c.model.params)
    if (name.rfind("heads.", 0) == 0)
      for (float& v : p.value.values()) v = static_cast<float>(rng.normal(0.0, 0.3));
  const Image img = read_image(m.image_path(m.items[0]).string());
  ItemInput<float> other;
  other.tokens = c.model.prepare_text(m.items[0].ingredients);
  const auto h = gradcam(c.model, c.model.prepare_image(img), other, "calories", 1);
  EXPECT_EQ(h.side, c.model.config.grid_side());
  ASSERT_EQ(h.values.size(), h.side * h.side);
  for (double v : h.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_THROW(gradcam(c.model, c.model.prepare_image(img), other, "calories", 99), DomainError);

  const Image over = render_overlay(img, h);
  EXPECT_EQ(over.width, img.width);
  EXPECT_EQ(over.height, img.height);
  EXPECT_EQ(to_json(h)["side"], h.side);

  auto lf = initialize<float>(m, ModelConfig::tiny(), quick_config(Variant::LF));
  EXPECT_THROW(gradcam(lf.model, c.model.prepare_image(img), {}, "calories", 0), ContractError);
}

TEST(Interpret, MinMaxNormalize) {
  std::vector<double> v{2, 4, 3};
  min_max_normalize(v);
  EXPECT_EQ(v, (std::vector<double>{0, 1, 0.5}));
  std::vector<double> flat{3, 3};
  min_max_normalize(flat);
  EXPECT_EQ(flat, (std::vector<double>{0, 0}));
}

TEST(Interpret, SaliencyCoversEveryPosition) {
  const auto& m = small_manifest();
  auto c = initialize<float>(m, ModelConfig::tiny(), quick_config(Variant::LF));
  Rng rng(5);
  for (auto& [name, p] : c.model.params)
    if (name.rfind("heads.", 0) == 0)
      for (float& v : p.value.values()) v = static_cast<float>(rng.normal(0.0, 0.3));
  const std::string text = "Salt, Milk & Oats";
  for (auto method : {SaliencyMethod::GradientTimesInput, SaliencyMethod::Attention}) {
    const auto s = text_saliency(c.model, text, {}, "sodium", 1, method);
    ASSERT_EQ(s.tokens.size(), c.model.config.context_length);
    double mx = 0;
    for (const auto& t : s.tokens) {
      if (t.special) {
        EXPECT_EQ(t.weight, 0.0);
      }
      mx = std::max(mx, t.weight);
    }
    EXPECT_DOUBLE_EQ(mx, 1.0);
    const std::string html = render_overlay(s);
    EXPECT_NE(html.find(">salt<"), std::string::npos);
    EXPECT_NE(html.find("<span"), std::string::npos);
  }
  EXPECT_FALSE(text_saliency(c.model, "", {}, "sodium", 0).warning.empty());
  EXPECT_THROW(saliency_method_from_string("lime"), ConfigError);
}
