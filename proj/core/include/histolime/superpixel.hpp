#pragma once

#include <cstdint>
#include <vector>

#include "histolime/raster.hpp"

namespace histolime {

/// Per-pixel segment ids in [0, k), row-major. Each segment is non-empty and
/// 4-connected; ids are numbered in raster order of first appearance.
struct SuperpixelMap {
  int width = 0;
  int height = 0;
  int k = 0;
  std::vector<std::int32_t> labels;

  std::int32_t at(int x, int y) const noexcept {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
  /// Pixel count per segment.
  std::vector<std::size_t> sizes() const;

  friend bool operator==(const SuperpixelMap&, const SuperpixelMap&) = default;
};

inline constexpr double kDefaultCompactness = 10.0;
inline constexpr int kSlicIterations = 10;

/// SLIC-style clustering in (R, G, B, x, y).
///
/// Centers start on an nx-by-ny grid with nx = min(k, ceil(sqrt(k * W / H)))
/// and ny = max(1, k / nx), so there are never more than target_k centers.
/// Distance is sqrt(dc^2 + (ds / S)^2 * compactness^2) with dc the RGB
/// distance, ds the pixel distance and S the larger grid step; each center
/// searches a (2S+1)^2 window. After 10 iterations, every
/// component that is not the largest one of its cluster is absorbed into
/// its largest neighbouring segment.
///
/// Throws SegmentationError when target_k < 1 or exceeds the pixel count.
SuperpixelMap segment(const Raster& img, int target_k, double compactness = kDefaultCompactness);

/// Grayscale id map: gray = round(id * 255 / max(1, k - 1)).
Raster superpixel_id_map(const SuperpixelMap& sp);

}  // namespace histolime
