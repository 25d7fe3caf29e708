#pragma once

// Independent reference implementations used only by tests. None of these
// share code with the library paths they check.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "histolime/raster.hpp"
#include "histolime/superpixel.hpp"

namespace histolime::oracle {

/// Weighted ridge via the full (k+1)x(k+1) normal equations including the
/// intercept column (unpenalized), solved by Gauss-Jordan elimination with
/// partial pivoting in long double. Returns [intercept, b1..bk], or nullopt
/// when singular.
std::optional<std::vector<long double>> weighted_ridge(
    const std::vector<std::vector<int>>& masks, const std::vector<double>& weights,
    const std::vector<double>& y, double lambda);

/// Bilinear resampler using exact integer source coordinates:
/// src = ((2d + 1) * s - side) / (2 * side), after the same center crop.
Raster rational_bilinear_resize(const Raster& img, int side);

/// Coverage, contiguous ids, non-empty and 4-connected segments.
bool superpixels_valid(const SuperpixelMap& sp, std::string* why = nullptr);

/// Brute-force channel mean in [0, 1].
double channel_mean(const Raster& img, int channel);

}  // namespace histolime::oracle
