#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "histolime/classifier.hpp"
#include "histolime/raster.hpp"
#include "histolime/superpixel.hpp"

namespace histolime {

/// How switched-off segments are filled.
struct Baseline {
  enum class Kind { SegmentMean, FixedColor };
  Kind kind = Kind::SegmentMean;
  Rgb color{0, 0, 0};

  static Baseline segment_mean() { return {}; }
  static Baseline fixed(Rgb c) { return {Kind::FixedColor, c}; }
};

struct LimeConfig {
  int n_samples = 5000;
  double kernel_width = 0.25;
  double ridge_lambda = 1.0;
  int top_k = 5;
  int n_segments = 50;
  double compactness = kDefaultCompactness;
  Baseline baseline;
  std::uint64_t seed = 0;
  std::optional<int> target_class;  // nullopt: class predicted for the unperturbed image
  int batch_size = 64;
  unsigned threads = 1;
};

/// Throws ShapeError naming the first out-of-range field.
void validate(const LimeConfig& cfg);

/// n x k row-major 0/1 matrix.
struct MaskMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> values;

  std::span<const std::uint8_t> row(int r) const {
    return std::span<const std::uint8_t>(values).subspan(static_cast<std::size_t>(r) * cols, cols);
  }
  std::uint8_t at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }

  friend bool operator==(const MaskMatrix&, const MaskMatrix&) = default;
};

/// Row 0 is all ones. Rows 1..n-1 are filled in row-major order, one
/// SplitMix64(seed) draw per entry, keeping the draw's top bit.
MaskMatrix sample_masks(int k, int n, std::uint64_t seed);

/// exp(-d^2 / width^2) with d = 1 - sqrt(sum(mask) / k), the cosine
/// distance to the all-ones mask (d = 1 for the zero mask).
double proximity_weight(std::span<const std::uint8_t> mask, double kernel_width);

/// Per-segment fill colors for switched-off segments.
std::vector<Rgb> baseline_colors(const Raster& img, const SuperpixelMap& sp,
                                 const Baseline& baseline);

/// Keeps segments whose mask bit is 1 and fills the others. Throws ShapeError
/// on dimension or mask length mismatch.
Raster apply_mask(const Raster& img, std::span<const std::uint8_t> mask, const SuperpixelMap& sp,
                  const Baseline& baseline);
Raster apply_mask(const Raster& img, std::span<const std::uint8_t> mask, const SuperpixelMap& sp,
                  std::span<const Rgb> fill);

struct PerturbationBatch {
  MaskMatrix masks;
  std::vector<double> weights;
  std::vector<double> responses;
};

struct SurrogateFit {
  std::vector<double> segment_weights;
  double intercept = 0.0;
  double local_r2 = 1.0;
};

/// Minimizes sum w_i (y_i - b0 - x_i.b)^2 + lambda |b|^2 with an unpenalized
/// intercept by solving the weighted-centered normal equations. local_r2 is
/// the weighted coefficient of determination (1 when y is constant).
/// Throws SingularSystem when the system cannot be solved.
SurrogateFit fit_surrogate(const PerturbationBatch& batch, double lambda);

/// intercept + mask . segment_weights
double surrogate_predict(const SurrogateFit& fit, std::span<const std::uint8_t> mask);

struct Explanation {
  std::string model;
  std::string image_id;
  LimeConfig config;
  int target_class = 1;
  std::vector<double> original_probabilities;
  SuperpixelMap superpixels;
  std::vector<double> segment_weights;
  double intercept = 0.0;
  double local_r2 = 1.0;

  int k() const noexcept { return superpixels.k; }
};

/// segment -> sample_masks -> apply_mask -> predict (batches of
/// cfg.batch_size, fanned out over cfg.threads) -> proximity weights ->
/// fit_surrogate. The image must already match the classifier input size.
/// Output does not depend on cfg.threads.
Explanation explain(const Classifier& classifier, const Raster& img, const LimeConfig& cfg);

/// The same pipeline on a precomputed segmentation.
Explanation explain(const Classifier& classifier, const Raster& img, const SuperpixelMap& sp,
                    const LimeConfig& cfg);

/// {model, image_id, seed, config:{...}, k, target_class, segment_weights, intercept, local_r2}
std::string explanation_to_json(const Explanation& e);

/// Segment ids ordered by descending weight (ties by id).
std::vector<int> rank_segments(std::span<const double> weights);

enum class OverlayMode { PositiveOnly, Signed };

inline constexpr Rgb kBoundaryColor{255, 255, 0};
inline constexpr Rgb kPositiveTint{0, 255, 0};
inline constexpr Rgb kNegativeTint{255, 0, 0};
/// Largest blend factor toward the tint color in signed mode.
inline constexpr double kMaxTint = 0.5;

/// PositiveOnly: the top_k segments by weight among those with weight > 0
/// keep their color and get a one-pixel boundary; every other pixel drops to
/// 20% brightness. Signed: each segment blends toward green (positive) or
/// red (negative) by kMaxTint * |w| / max|w|.
/// Throws ShapeError on size mismatch or top_k outside [1, k].
Raster render_overlay(const Raster& img, const SuperpixelMap& sp, std::span<const double> weights,
                      int top_k, OverlayMode mode);
Raster render_overlay(const Raster& img, const Explanation& e, int top_k, OverlayMode mode);

}  // namespace histolime
