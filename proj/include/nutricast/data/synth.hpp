#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nutricast/core/error.hpp"
#include "nutricast/core/random.hpp"
#include "nutricast/data/manifest.hpp"
#include "nutricast/image/image.hpp"

// Synthetic desk-scale dataset.
//
// Every product shows one glyph per ingredient on a light background, one
// glyph per grid cell. Ingredients come in look-alike pairs that share a glyph
// shape, so the image cannot tell a pair apart while the ingredient statement
// can. All glyphs of a product share a tint level that the text never
// mentions. Some products carry a dark cross "sticker" that is not an
// ingredient. Channels:
//   calories       image only  (tint level)
//   sodium         text only   (salt present; salt looks like sugar)
//   fat            both        (tint level + cream present; cream looks like milk)
//   protein        linear rule over ingredient presence
//   carbohydrates  one glyph    (sticker present, localized to its cell)
namespace nutricast::synth {

enum class Shape { Disc, Square, Triangle, Diamond, Cross };

struct Ingredient {
  const char* name;
  Shape shape;
  double protein;  // g contributed
};

// Index i and i + 4 share a shape.
inline constexpr std::array<Ingredient, 8> kIngredients{{
    {"apple", Shape::Disc, 0.3},
    {"sugar", Shape::Square, 0.0},
    {"wheat", Shape::Triangle, 11.0},
    {"milk", Shape::Diamond, 3.3},
    {"peach", Shape::Disc, 0.6},
    {"salt", Shape::Square, 0.0},
    {"oats", Shape::Triangle, 13.5},
    {"cream", Shape::Diamond, 2.1},
}};

inline constexpr std::size_t kShapeCount = 4;
inline constexpr std::size_t kTintLevels = 5;
inline constexpr std::array<std::array<std::uint8_t, 3>, kTintLevels> kTints{{
    {40, 90, 200}, {60, 170, 160}, {120, 190, 60}, {220, 150, 40}, {210, 50, 50}}};
inline constexpr std::array<std::uint8_t, 3> kStickerColor{25, 25, 25};
inline constexpr std::uint8_t kBackground = 235;

inline double sodium_mg(bool has_salt) { return has_salt ? 480.0 : 0.0; }

inline std::size_t ingredient_index(const std::string& name) {
  for (std::size_t i = 0; i < kIngredients.size(); ++i)
    if (name == kIngredients[i].name) return i;
  throw DomainError("unknown synthetic ingredient '" + name + "'");
}

/// Planted linear protein rule: sum of per-ingredient contributions.
inline double protein_rule(const std::vector<std::string>& ingredients) {
  double total = 0;
  for (const auto& name : ingredients) total += kIngredients[ingredient_index(name)].protein;
  return total;
}

struct SynthOptions {
  std::size_t resolution = 64;
  std::size_t cell = 32;
  double sticker_probability = 0.5;
};

/// Latent description of one generated product.
struct Product {
  std::vector<std::size_t> ingredients;        // indices into kIngredients, statement order
  std::vector<std::size_t> ingredient_cells;   // grid cell per ingredient
  std::size_t tint = 0;
  bool sticker = false;
  std::size_t sticker_cell = 0;
  double noise_a = 0, noise_b = 0;             // in [0, 1)
};

inline bool contains(const Product& p, const char* name) {
  const std::size_t idx = ingredient_index(name);
  return std::find(p.ingredients.begin(), p.ingredients.end(), idx) != p.ingredients.end();
}

inline std::map<std::string, NutrientValue> nutrients_of(const Product& p) {
  std::vector<std::string> names;
  for (auto i : p.ingredients) names.emplace_back(kIngredients[i].name);
  const double cal_base = 40.0 * static_cast<double>(p.tint);
  const double fat_base = 3.0 * static_cast<double>(p.tint) + (contains(p, "cream") ? 7.0 : 0.0);
  return {
      {"calories", {cal_base > 0 ? cal_base + 8.0 * p.noise_a : 0.0, "kcal"}},
      {"sodium", {sodium_mg(contains(p, "salt")), "mg"}},
      {"fat", {fat_base > 0 ? fat_base + 0.5 * p.noise_b : 0.0, "g"}},
      {"protein", {protein_rule(names), "g"}},
      {"carbohydrates", {p.sticker ? 25.0 : 0.0, "g"}},
  };
}

inline std::string statement_of(const Product& p) {
  std::string s;
  for (std::size_t k = 0; k < p.ingredients.size(); ++k) {
    std::string name = kIngredients[p.ingredients[k]].name;
    name[0] = static_cast<char>(name[0] - 'a' + 'A');
    s += (k ? ", " : "") + name;
  }
  return s;
}

inline bool inside(Shape shape, double dx, double dy, double size) {
  switch (shape) {
    case Shape::Disc: return dx * dx + dy * dy <= (0.38 * size) * (0.38 * size);
    case Shape::Square: return std::abs(dx) <= 0.32 * size && std::abs(dy) <= 0.32 * size;
    case Shape::Triangle: {
      const double top = -0.36 * size, bottom = 0.34 * size;
      if (dy < top || dy > bottom) return false;
      return std::abs(dx) <= 0.40 * size * (dy - top) / (bottom - top);
    }
    case Shape::Diamond: return std::abs(dx) + std::abs(dy) <= 0.42 * size;
    case Shape::Cross: {
      const double arm = 0.40 * size, half = 0.11 * size;
      return (std::abs(dx) <= arm && std::abs(dy) <= half) || (std::abs(dy) <= arm && std::abs(dx) <= half);
    }
  }
  return false;
}

inline void draw_glyph(Image& img, std::size_t cell_index, std::size_t cell, Shape shape,
                       const std::array<std::uint8_t, 3>& color, double jitter_x, double jitter_y) {
  const std::size_t per_row = img.width / cell;
  const std::size_t x0 = (cell_index % per_row) * cell, y0 = (cell_index / per_row) * cell;
  const double cx = static_cast<double>(cell) / 2.0 + jitter_x, cy = static_cast<double>(cell) / 2.0 + jitter_y;
  for (std::size_t y = 0; y < cell; ++y)
    for (std::size_t x = 0; x < cell; ++x) {
      if (!inside(shape, static_cast<double>(x) + 0.5 - cx, static_cast<double>(y) + 0.5 - cy,
                  static_cast<double>(cell)))
        continue;
      std::copy(color.begin(), color.end(), img.at(x0 + x, y0 + y));
    }
}

/// Draws a product's image deterministically from `rng`.
inline Image render(const Product& p, const SynthOptions& opt, Rng& rng) {
  Image img(opt.resolution, opt.resolution);
  for (auto& px : img.pixels) px = static_cast<std::uint8_t>(kBackground - 8 + rng.below(17));
  const double j = 0.06 * static_cast<double>(opt.cell);
  for (std::size_t k = 0; k < p.ingredients.size(); ++k) {
    const double jx = rng.uniform(-j, j), jy = rng.uniform(-j, j);
    draw_glyph(img, p.ingredient_cells[k], opt.cell, kIngredients[p.ingredients[k]].shape, kTints[p.tint], jx, jy);
  }
  if (p.sticker) {
    const double jx = rng.uniform(-j, j), jy = rng.uniform(-j, j);
    draw_glyph(img, p.sticker_cell, opt.cell, Shape::Cross, kStickerColor, jx, jy);
  }
  return img;
}

/// Samples product `index` of a run. Each product has its own stream so
/// items do not depend on how many were generated before them.
inline Product sample_product(std::uint64_t seed, std::size_t index, const SynthOptions& opt) {
  if (opt.cell == 0 || opt.resolution % opt.cell != 0) throw ConfigError("synth: resolution must be a multiple of cell");
  const std::size_t cells = (opt.resolution / opt.cell) * (opt.resolution / opt.cell);
  if (cells < 4) throw ConfigError("synth: need at least a 2x2 grid of cells");
  Rng rng(derive_seed(seed, index));
  Product p;
  const std::size_t m = 1 + static_cast<std::size_t>(rng.below(3));
  std::vector<std::size_t> shapes(kShapeCount);
  for (std::size_t s = 0; s < kShapeCount; ++s) shapes[s] = s;
  rng.shuffle(shapes);
  for (std::size_t k = 0; k < m; ++k) p.ingredients.push_back(shapes[k] + (rng.bernoulli(0.5) ? kShapeCount : 0));
  p.tint = static_cast<std::size_t>(rng.below(kTintLevels));
  p.sticker = rng.bernoulli(opt.sticker_probability);
  std::vector<std::size_t> order(cells);
  for (std::size_t c = 0; c < cells; ++c) order[c] = c;
  rng.shuffle(order);
  for (std::size_t k = 0; k < m; ++k) p.ingredient_cells.push_back(order[k]);
  p.sticker_cell = order[m];
  p.noise_a = rng.uniform();
  p.noise_b = rng.uniform();
  return p;
}

inline std::string item_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "synth-%06zu", index);
  return buf;
}

inline FoodItem describe(const Product& p, std::size_t index) {
  FoodItem item;
  item.id = item_id(index);
  item.image_path = "images/" + item.id + ".png";
  item.ingredients = statement_of(p);
  item.nutrients = nutrients_of(p);
  item.category = (contains(p, "milk") || contains(p, "cream")) ? "beverage" : "snack";
  return item;
}

inline Image render_product(const Product& p, std::uint64_t seed, std::size_t index, const SynthOptions& opt) {
  Rng rng(derive_seed(derive_seed(seed, index), 0x1A6E));
  return render(p, opt, rng);
}

struct SynthOutput {
  std::vector<FoodItem> items;
  std::vector<Product> products;
  std::filesystem::path manifest;
};

/// Writes `n` products to `out_dir` (manifest.jsonl + images/*.png).
inline SynthOutput generate(std::size_t n, std::uint64_t seed, const std::filesystem::path& out_dir,
                            const SynthOptions& opt = {}) {
  if (n == 0) throw DomainError("synth: n must be at least 1");
  std::filesystem::create_directories(out_dir / "images");
  SynthOutput out;
  for (std::size_t i = 0; i < n; ++i) {
    Product p = sample_product(seed, i, opt);
    FoodItem item = describe(p, i);
    write_png(render_product(p, seed, i, opt), (out_dir / item.image_path).string());
    out.items.push_back(std::move(item));
    out.products.push_back(std::move(p));
  }
  out.manifest = out_dir / "manifest.jsonl";
  write_manifest(out.items, out.manifest);
  return out;
}

}  // namespace nutricast::synth
