#pragma once

#include <cmath>
#include <cstdio>
#include <string>

#include "nutricast/image/image.hpp"
#include "nutricast/interpret/gradcam.hpp"
#include "nutricast/interpret/saliency.hpp"

namespace nutricast {

inline constexpr std::array<double, 3> kHeatColor{230.0, 30.0, 30.0};

/// Blends the heatmap (nearest neighbour per patch) onto `img`; a pixel moves
/// toward red in proportion to its patch value times `alpha`.
inline Image render_overlay(const Image& img, const Heatmap& h, double alpha = 0.6) {
  if (h.side == 0 || h.values.size() != h.side * h.side) throw DimensionError("render_overlay: malformed heatmap");
  Image out = img;
  for (std::size_t y = 0; y < img.height; ++y) {
    const std::size_t row = std::min(h.side - 1, y * h.side / img.height);
    for (std::size_t x = 0; x < img.width; ++x) {
      const std::size_t col = std::min(h.side - 1, x * h.side / img.width);
      const double a = alpha * h.values[row * h.side + col];
      if (a <= 0) continue;
      std::uint8_t* px = out.at(x, y);
      for (int c = 0; c < 3; ++c)
        px[c] = static_cast<std::uint8_t>(std::lround((1.0 - a) * px[c] + a * kHeatColor[static_cast<std::size_t>(c)]));
    }
  }
  return out;
}

inline std::string html_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Standalone HTML page with one span per word; background opacity = weight.
inline std::string render_overlay(const TokenSaliency& s) {
  std::string html =
      "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>saliency: " + html_escape(s.nutrient) +
      "</title></head>\n<body style=\"font-family: sans-serif\">\n<p>nutrient <b>" + html_escape(s.nutrient) +
      "</b>, class " + std::to_string(s.target_class) + "</p>\n<p>";
  char buf[96];
  for (const auto& t : s.words()) {
    std::snprintf(buf, sizeof buf, "<span style=\"background: rgba(230, 30, 30, %.3f)\" title=\"%.4f\">", t.weight,
                  t.weight);
    html += buf + html_escape(t.token) + "</span> ";
  }
  html += "</p>\n";
  if (!s.warning.empty()) html += "<p><i>" + html_escape(s.warning) + "</i></p>\n";
  html += "</body></html>\n";
  return html;
}

}  // namespace nutricast
