#pragma once

#include <vector>

#include "histolime/raster.hpp"
#include "histolime/rng.hpp"

namespace histolime {

/// Center-crops to a square along the longer axis, then resamples bilinearly
/// to side x side using pixel-center alignment. Bit-identical for equal inputs.
Raster resize_to_input(const Raster& img, int side);

enum class AugmentOp { FlipHorizontal, Shift, Zoom };

struct AugmentSpec {
  AugmentOp op = AugmentOp::FlipHorizontal;
  double dx = 0.0;      // shift: fraction of width, [-0.5, 0.5]
  double dy = 0.0;      // shift: fraction of height, [-0.5, 0.5]
  double factor = 1.0;  // zoom: (0.5, 2.0]
  Rgb fill{0, 0, 0};

  static AugmentSpec flip() { return {}; }
  static AugmentSpec shift(double dx, double dy, Rgb fill = {0, 0, 0}) {
    return {AugmentOp::Shift, dx, dy, 1.0, fill};
  }
  static AugmentSpec zoom(double factor, Rgb fill = {0, 0, 0}) {
    return {AugmentOp::Zoom, 0.0, 0.0, factor, fill};
  }
};

/// Throws InvalidAugmentSpec if the fields of the selected op are out of range.
void validate(const AugmentSpec& spec);

Raster augment(const Raster& img, const AugmentSpec& spec);

/// Randomized augmentation ranges. Draws come from a caller-owned generator
/// so results are reproducible from the seed alone.
struct AugmentPolicy {
  double flip_probability = 0.5;
  double max_shift = 0.1;
  double min_zoom = 0.9;
  double max_zoom = 1.1;
  Rgb fill{0, 0, 0};

  /// Always returns [flip?] shift zoom, in that order.
  std::vector<AugmentSpec> sample(SplitMix64& rng) const;
};

Raster augment(const Raster& img, const std::vector<AugmentSpec>& chain);

}  // namespace histolime
