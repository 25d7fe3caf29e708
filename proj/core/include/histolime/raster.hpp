#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace histolime {

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit interleaved RGB image, row-major. Always three channels.
class Raster {
 public:
  static constexpr int kChannels = 3;

  Raster() = default;
  /// Throws ShapeError when width or height is < 1.
  Raster(int width, int height, Rgb fill = {0, 0, 0});
  /// Takes ownership of `data`; its length must be width*height*3.
  Raster(int width, int height, std::vector<std::uint8_t> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return kChannels; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::span<std::uint8_t> data() noexcept { return data_; }

  std::uint8_t* pixel(int x, int y) noexcept {
    return data_.data() + (static_cast<std::size_t>(y) * width_ + x) * kChannels;
  }
  const std::uint8_t* pixel(int x, int y) const noexcept {
    return data_.data() + (static_cast<std::size_t>(y) * width_ + x) * kChannels;
  }
  Rgb at(int x, int y) const noexcept {
    const auto* p = pixel(x, y);
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) noexcept {
    auto* p = pixel(x, y);
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

}  // namespace histolime
