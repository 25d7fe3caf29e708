#include <algorithm>
#include <cmath>
#include <string>

#include "histolime/errors.hpp"
#include "histolime/lime.hpp"

namespace histolime {

Raster render_overlay(const Raster& img, const SuperpixelMap& sp, std::span<const double> weights,
                      int top_k, OverlayMode mode) {
  if (img.width() != sp.width || img.height() != sp.height) {
    throw ShapeError("overlay image and superpixel map differ in size");
  }
  if (weights.size() != static_cast<std::size_t>(sp.k)) {
    throw ShapeError("expected " + std::to_string(sp.k) + " segment weights, got " +
                     std::to_string(weights.size()));
  }
  if (top_k < 1 || top_k > sp.k) {
    throw ShapeError("top_k must lie in [1, " + std::to_string(sp.k) + "], got " +
                     std::to_string(top_k));
  }

  const int w = img.width();
  const int h = img.height();
  Raster out = img;

  if (mode == OverlayMode::Signed) {
    double max_abs = 0.0;
    for (double v : weights) max_abs = std::max(max_abs, std::abs(v));
    if (max_abs == 0.0) return out;
    auto data = out.data();
    for (std::size_t p = 0; p < sp.labels.size(); ++p) {
      const double v = weights[static_cast<std::size_t>(sp.labels[p])];
      if (v == 0.0) continue;
      const double alpha = kMaxTint * std::abs(v) / max_abs;
      const Rgb& tint = v > 0 ? kPositiveTint : kNegativeTint;
      for (std::size_t c = 0; c < 3; ++c) {
        const double blended = (1.0 - alpha) * data[p * 3 + c] + alpha * tint[c];
        data[p * 3 + c] = static_cast<std::uint8_t>(std::clamp(std::floor(blended + 0.5), 0.0, 255.0));
      }
    }
    return out;
  }

  std::vector<std::uint8_t> kept(static_cast<std::size_t>(sp.k), 0);
  int taken = 0;
  for (int s : rank_segments(weights)) {
    if (taken == top_k || !(weights[static_cast<std::size_t>(s)] > 0.0)) break;
    kept[static_cast<std::size_t>(s)] = 1;
    ++taken;
  }

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto s = sp.at(x, y);
      auto* px = out.pixel(x, y);
      if (!kept[static_cast<std::size_t>(s)]) {
        for (int c = 0; c < 3; ++c) px[c] = static_cast<std::uint8_t>((2 * px[c] + 5) / 10);
        continue;
      }
      const bool edge = x == 0 || y == 0 || x == w - 1 || y == h - 1 || sp.at(x - 1, y) != s ||
                        sp.at(x + 1, y) != s || sp.at(x, y - 1) != s || sp.at(x, y + 1) != s;
      if (edge) out.set(x, y, kBoundaryColor);
    }
  }
  return out;
}

Raster render_overlay(const Raster& img, const Explanation& e, int top_k, OverlayMode mode) {
  return render_overlay(img, e.superpixels, e.segment_weights, top_k, mode);
}

}  // namespace histolime
