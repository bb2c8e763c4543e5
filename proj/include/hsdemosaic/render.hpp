#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "hsdemosaic/mosaic.hpp"

namespace hsd {

/// 8-bit interleaved RGB image.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGBRGB...

  std::array<std::uint8_t, 3> at(int y, int x) const {
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
  }
};

/// Linear-light sRGB for every pixel, before clipping and encoding.
/// Planes are [3 x height x width].
std::vector<double> cube_to_linear_rgb(const HyperCube& cube);

/// CIE 1931 2-degree observer under D65, normalized so unit reflectance maps
/// to the D65 white point, then sRGB-encoded and quantized.
RgbImage cube_to_rgb(const HyperCube& cube);

void write_png(const RgbImage& image, const std::filesystem::path& path);
RgbImage read_png(const std::filesystem::path& path);

/// 16-bit PGM of one band (values in [0,1] scaled to 0..65535).
void write_band_pgm(const HyperCube& cube, int band, const std::filesystem::path& path);

}  // namespace hsd
