#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "histolime/raster.hpp"

namespace histolime {

enum class ImageFormat { Png, Jpeg };

inline constexpr int kJpegQuality = 95;

/// Decodes a PNG or JPEG stream into RGB. Grayscale and palette images are
/// expanded to three channels; alpha is dropped; 16-bit PNG is reduced to 8.
Raster decode_image(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_image(const Raster& img, ImageFormat format);

/// Format from the file extension (.png, .jpg, .jpeg; case-insensitive).
/// Throws UnsupportedFormat for anything else.
ImageFormat format_from_extension(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
Raster read_image(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_image(const std::filesystem::path& path, const Raster& img);

}  // namespace histolime
