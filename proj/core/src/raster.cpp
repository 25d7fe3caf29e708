#include "histolime/raster.hpp"

#include <string>

#include "histolime/errors.hpp"

namespace histolime {

Raster::Raster(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw ShapeError("raster dimensions must be positive, got " + std::to_string(width) + "x" +
                     std::to_string(height));
  }
  data_.resize(pixel_count() * kChannels);
  for (std::size_t i = 0; i < data_.size(); i += kChannels) {
    data_[i] = fill[0];
    data_[i + 1] = fill[1];
    data_[i + 2] = fill[2];
  }
}

Raster::Raster(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 1 || height < 1) {
    throw ShapeError("raster dimensions must be positive, got " + std::to_string(width) + "x" +
                     std::to_string(height));
  }
  if (data_.size() != pixel_count() * kChannels) {
    throw ShapeError("raster data length " + std::to_string(data_.size()) + " does not match " +
                     std::to_string(width) + "x" + std::to_string(height) + "x3");
  }
}

}  // namespace histolime
