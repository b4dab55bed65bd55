#pragma once

#include <cstdio>
#include <string>

#include "nutricast/eval/report.hpp"

namespace nutricast {

/// Static SVG bar chart of the error-bucket fractions of one nutrient.
inline std::string bucket_bars_svg(const NutrientReport& r) {
  constexpr int w = 360, h = 220, base = 180, bar = 60, gap = 25, left = 30;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
                    std::to_string(h) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<text x=\"10\" y=\"16\">" + r.nutrient + ": relative error buckets (n=" + std::to_string(r.errors.total) +
         ")</text>\n";
  svg += "<line x1=\"" + std::to_string(left - 5) + "\" y1=\"" + std::to_string(base) + "\" x2=\"" +
         std::to_string(w - 10) + "\" y2=\"" + std::to_string(base) + "\" stroke=\"black\"/>\n";
  char buf[320];
  for (std::size_t b = 0; b < kBucketNames.size(); ++b) {
    const double f = r.errors.fraction(static_cast<ErrorBucket>(b));
    const int x = left + static_cast<int>(b) * (bar + gap);
    const double bh = f * 150.0;
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%d\" y=\"%.2f\" width=\"%d\" height=\"%.2f\" fill=\"#4a78b5\"/>\n"
                  "<text x=\"%d\" y=\"%d\" text-anchor=\"middle\">%s</text>\n"
                  "<text x=\"%d\" y=\"%.2f\" text-anchor=\"middle\">%.3f</text>\n",
                  x, base - bh, bar, bh, x + bar / 2, base + 16, kBucketNames[b], x + bar / 2, base - bh - 4, f);
    svg += buf;
  }
  return svg + "</svg>\n";
}

}  // namespace nutricast
