#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace hsd {

/// Square filter layout of a snapshot mosaic sensor.
///
/// `band_at` is row-major over the cell: band_at[r * cols + c] is the band
/// sampled at pattern row r, column c. The canonical layout puts band z at
/// (z / side, z % side).
struct MosaicPattern {
  int rows = 4;
  int cols = 4;
  std::vector<int> band_at;
  std::vector<double> wavelengths_nm;

  /// Canonical row-major layout, wavelengths linearly spaced over
  /// [463, 638] nm.
  static MosaicPattern standard(int side = 4);

  int side() const noexcept { return rows; }
  int band_count() const noexcept { return rows * cols; }
  int band(int row, int col) const { return band_at[static_cast<std::size_t>(row * cols + col)]; }

  /// (row, col) of the pattern cell holding `band`.
  std::pair<int, int> cell_of(int band) const;

  /// Throws InvalidPattern when any invariant is violated.
  void validate() const;

  bool operator==(const MosaicPattern&) const = default;
};

struct Phase {
  int row = 0;
  int col = 0;
  bool operator==(const Phase&) const = default;
};

/// Single-plane sensor image, row-major [height x width].
struct MosaicImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;
  MosaicPattern pattern = MosaicPattern::standard();
  Phase phase{};

  MosaicImage() = default;
  MosaicImage(int width, int height, MosaicPattern pattern, float fill = 0.0f);

  float& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }

  /// Band sampled at pixel (y, x), honoring the phase.
  int band_at_pixel(int y, int x) const;
};

/// Dense band-major [bands x height x width] reflectance volume.
struct HyperCube {
  int bands = 0;
  int width = 0;
  int height = 0;
  std::vector<float> data;
  std::vector<double> wavelengths_nm;

  HyperCube() = default;
  HyperCube(int bands, int width, int height, std::vector<double> wavelengths_nm, float fill = 0.0f);

  std::size_t plane_size() const noexcept { return static_cast<std::size_t>(width) * height; }
  float& at(int b, int y, int x) { return data[b * plane_size() + static_cast<std::size_t>(y) * width + x]; }
  float at(int b, int y, int x) const {
    return data[b * plane_size() + static_cast<std::size_t>(y) * width + x];
  }
  std::span<float> band(int b) { return {data.data() + b * plane_size(), plane_size()}; }
  std::span<const float> band(int b) const { return {data.data() + b * plane_size(), plane_size()}; }

  /// Spatial crop [x0, x0+w) x [y0, y0+h) of every band.
  HyperCube crop(int x0, int y0, int w, int h) const;
};

enum class SamplingMode {
  /// Full-resolution cube, one band kept per pixel following the filter layout.
  Simulate,
  /// Low-resolution [L, H/side, W/side] cube, exact inverse of m2c_resample.
  Inverse,
};

/// Hand-crafted mosaic-to-cube rearrangement:
/// C(x, y, z) = MI(y * side + row(z), x * side + col(z)).
HyperCube m2c_resample(const MosaicImage& mi);

MosaicImage cube_to_mosaic(const HyperCube& cube, const MosaicPattern& pattern,
                           SamplingMode mode = SamplingMode::Inverse);

MosaicImage extract_patch(const MosaicImage& mi, int x0, int y0, int w, int h);

MosaicImage average_frames(std::span<const MosaicImage> frames);

/// Raw-buffer form of m2c_resample used by the network: `mosaic` is
/// [height x width], `cube` receives [L x height/side x width/side].
/// Dimensions must already be validated.
template <typename T>
void m2c_gather(std::span<const T> mosaic, int height, int width, const MosaicPattern& pattern, std::span<T> cube) {
  const int side = pattern.side();
  const int cw = width / side;
  const int ch = height / side;
  for (int z = 0; z < pattern.band_count(); ++z) {
    const auto [row, col] = pattern.cell_of(z);
    T* dst = cube.data() + static_cast<std::size_t>(z) * cw * ch;
    for (int y = 0; y < ch; ++y) {
      const T* src = mosaic.data() + static_cast<std::size_t>(y * side + row) * width + col;
      for (int x = 0; x < cw; ++x) dst[y * cw + x] = src[static_cast<std::size_t>(x) * side];
    }
  }
}

}  // namespace hsd
