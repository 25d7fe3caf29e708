#include "histolime/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "histolime/errors.hpp"

namespace histolime {
namespace {

struct Tap {
  int i0;
  int i1;
  double f;
};

// Pixel-center mapping of dst index d in [0, dst) onto a source axis of
// length src, clamped to the valid sample range.
std::vector<Tap> make_taps(int src, int dst) {
  std::vector<Tap> taps(static_cast<std::size_t>(dst));
  const double scale = static_cast<double>(src) / dst;
  for (int d = 0; d < dst; ++d) {
    double s = (d + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src - 1));
    const int i0 = static_cast<int>(std::floor(s));
    const int i1 = std::min(i0 + 1, src - 1);
    taps[static_cast<std::size_t>(d)] = {i0, i1, s - i0};
  }
  return taps;
}

std::uint8_t to_sample(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

double lerp_channel(const Raster& img, int x0, int x1, double fx, int y0, int y1, double fy,
                    int c) {
  const double a = img.pixel(x0, y0)[c];
  const double b = img.pixel(x1, y0)[c];
  const double d = img.pixel(x0, y1)[c];
  const double e = img.pixel(x1, y1)[c];
  return (1.0 - fy) * ((1.0 - fx) * a + fx * b) + fy * ((1.0 - fx) * d + fx * e);
}

Raster flip_horizontal(const Raster& img) {
  Raster out(img.width(), img.height());
  const int w = img.width();
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      std::memcpy(out.pixel(x, y), img.pixel(w - 1 - x, y), Raster::kChannels);
    }
  }
  return out;
}

Raster shift(const Raster& img, const AugmentSpec& spec) {
  const int w = img.width();
  const int h = img.height();
  const long ox = std::lround(spec.dx * w);
  const long oy = std::lround(spec.dy * h);
  Raster out(w, h, spec.fill);
  for (int y = 0; y < h; ++y) {
    const long sy = y - oy;
    if (sy < 0 || sy >= h) continue;
    for (int x = 0; x < w; ++x) {
      const long sx = x - ox;
      if (sx < 0 || sx >= w) continue;
      std::memcpy(out.pixel(x, y), img.pixel(static_cast<int>(sx), static_cast<int>(sy)),
                  Raster::kChannels);
    }
  }
  return out;
}

Raster zoom(const Raster& img, const AugmentSpec& spec) {
  const int w = img.width();
  const int h = img.height();
  Raster out(w, h, spec.fill);
  const double cx = w / 2.0;
  const double cy = h / 2.0;
  for (int y = 0; y < h; ++y) {
    const double sy = (y + 0.5 - cy) / spec.factor + cy - 0.5;
    if (sy < -0.5 || sy > h - 0.5) continue;
    const double cy_ = std::clamp(sy, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(std::floor(cy_));
    const int y1 = std::min(y0 + 1, h - 1);
    const double fy = cy_ - y0;
    for (int x = 0; x < w; ++x) {
      const double sx = (x + 0.5 - cx) / spec.factor + cx - 0.5;
      if (sx < -0.5 || sx > w - 0.5) continue;
      const double cx_ = std::clamp(sx, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(std::floor(cx_));
      const int x1 = std::min(x0 + 1, w - 1);
      const double fx = cx_ - x0;
      auto* p = out.pixel(x, y);
      for (int c = 0; c < Raster::kChannels; ++c) {
        p[c] = to_sample(lerp_channel(img, x0, x1, fx, y0, y1, fy, c));
      }
    }
  }
  return out;
}

}  // namespace

Raster resize_to_input(const Raster& img, int side) {
  if (side < 1) throw ShapeError("resize side must be >= 1, got " + std::to_string(side));
  if (img.empty()) throw ShapeError("cannot resize an empty raster");
  const int s = std::min(img.width(), img.height());
  const int x_off = (img.width() - s) / 2;
  const int y_off = (img.height() - s) / 2;

  Raster out(side, side);
  if (s == side) {
    for (int y = 0; y < side; ++y) {
      std::memcpy(out.pixel(0, y), img.pixel(x_off, y + y_off),
                  static_cast<std::size_t>(side) * Raster::kChannels);
    }
    return out;
  }

  const auto xt = make_taps(s, side);
  const auto yt = make_taps(s, side);
  for (int y = 0; y < side; ++y) {
    const Tap& ty = yt[static_cast<std::size_t>(y)];
    for (int x = 0; x < side; ++x) {
      const Tap& tx = xt[static_cast<std::size_t>(x)];
      auto* p = out.pixel(x, y);
      for (int c = 0; c < Raster::kChannels; ++c) {
        p[c] = to_sample(lerp_channel(img, tx.i0 + x_off, tx.i1 + x_off, tx.f, ty.i0 + y_off,
                                      ty.i1 + y_off, ty.f, c));
      }
    }
  }
  return out;
}

void validate(const AugmentSpec& spec) {
  switch (spec.op) {
    case AugmentOp::FlipHorizontal:
      return;
    case AugmentOp::Shift:
      if (!std::isfinite(spec.dx) || !std::isfinite(spec.dy) || std::abs(spec.dx) > 0.5 ||
          std::abs(spec.dy) > 0.5) {
        throw InvalidAugmentSpec("shift fractions must lie in [-0.5, 0.5], got dx=" +
                                 std::to_string(spec.dx) + " dy=" + std::to_string(spec.dy));
      }
      return;
    case AugmentOp::Zoom:
      if (!std::isfinite(spec.factor) || spec.factor <= 0.5 || spec.factor > 2.0) {
        throw InvalidAugmentSpec("zoom factor must lie in (0.5, 2.0], got " +
                                 std::to_string(spec.factor));
      }
      return;
  }
  throw InvalidAugmentSpec("unknown augmentation op");
}

Raster augment(const Raster& img, const AugmentSpec& spec) {
  validate(spec);
  if (img.empty()) throw ShapeError("cannot augment an empty raster");
  switch (spec.op) {
    case AugmentOp::FlipHorizontal:
      return flip_horizontal(img);
    case AugmentOp::Shift:
      return shift(img, spec);
    case AugmentOp::Zoom:
      return zoom(img, spec);
  }
  throw InvalidAugmentSpec("unknown augmentation op");
}

Raster augment(const Raster& img, const std::vector<AugmentSpec>& chain) {
  Raster out = img;
  for (const auto& spec : chain) out = augment(out, spec);
  return out;
}

std::vector<AugmentSpec> AugmentPolicy::sample(SplitMix64& rng) const {
  std::vector<AugmentSpec> chain;
  if (rng.uniform() < flip_probability) chain.push_back(AugmentSpec::flip());
  const double dx = rng.uniform(-max_shift, max_shift);
  const double dy = rng.uniform(-max_shift, max_shift);
  chain.push_back(AugmentSpec::shift(dx, dy, fill));
  chain.push_back(AugmentSpec::zoom(rng.uniform(min_zoom, max_zoom), fill));
  return chain;
}

}  // namespace histolime
