#include "hsdemosaic/mosaic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hsdemosaic/error.hpp"

namespace hsd {

MosaicPattern MosaicPattern::standard(int side) {
  MosaicPattern p;
  p.rows = side;
  p.cols = side;
  const int bands = side * side;
  p.band_at.resize(static_cast<std::size_t>(bands));
  p.wavelengths_nm.resize(static_cast<std::size_t>(bands));
  for (int z = 0; z < bands; ++z) {
    p.band_at[static_cast<std::size_t>(z)] = z;
    p.wavelengths_nm[static_cast<std::size_t>(z)] =
        bands == 1 ? 463.0 : 463.0 + (638.0 - 463.0) * z / (bands - 1);
  }
  return p;
}

std::pair<int, int> MosaicPattern::cell_of(int band) const {
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (this->band(r, c) == band) return {r, c};
    }
  }
  throw Error(ErrorCode::InvalidPattern, "band " + std::to_string(band) + " not in pattern");
}

void MosaicPattern::validate() const {
  if (rows < 1 || rows != cols) {
    throw Error(ErrorCode::InvalidPattern, "pattern must be square, got " + std::to_string(rows) + "x" +
                                               std::to_string(cols));
  }
  const auto bands = static_cast<std::size_t>(band_count());
  if (band_at.size() != bands) throw Error(ErrorCode::InvalidPattern, "band_at size does not match rows*cols");
  std::vector<bool> seen(bands, false);
  for (int b : band_at) {
    if (b < 0 || static_cast<std::size_t>(b) >= bands || seen[static_cast<std::size_t>(b)]) {
      throw Error(ErrorCode::InvalidPattern, "band_at is not a permutation of 0..L-1");
    }
    seen[static_cast<std::size_t>(b)] = true;
  }
  if (wavelengths_nm.size() != bands) {
    throw Error(ErrorCode::InvalidPattern, "expected " + std::to_string(bands) + " wavelengths");
  }
  for (std::size_t i = 0; i < bands; ++i) {
    const double w = wavelengths_nm[i];
    if (!(w >= 350.0 && w <= 1100.0)) throw Error(ErrorCode::InvalidPattern, "wavelength outside [350, 1100] nm");
    if (i > 0 && !(w > wavelengths_nm[i - 1])) {
      throw Error(ErrorCode::InvalidPattern, "wavelengths must be strictly increasing");
    }
  }
}

MosaicImage::MosaicImage(int w, int h, MosaicPattern p, float fill)
    : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill), pattern(std::move(p)) {}

int MosaicImage::band_at_pixel(int y, int x) const {
  const int side = pattern.side();
  return pattern.band((y + phase.row) % side, (x + phase.col) % side);
}

HyperCube::HyperCube(int b, int w, int h, std::vector<double> wl, float fill)
    : bands(b), width(w), height(h), data(static_cast<std::size_t>(b) * w * h, fill), wavelengths_nm(std::move(wl)) {}

HyperCube HyperCube::crop(int x0, int y0, int w, int h) const {
  if (x0 < 0 || y0 < 0 || w <= 0 || h <= 0 || x0 + w > width || y0 + h > height) {
    throw Error(ErrorCode::OutOfBounds, "crop outside cube");
  }
  HyperCube out(bands, w, h, wavelengths_nm);
  for (int b = 0; b < bands; ++b) {
    for (int y = 0; y < h; ++y) {
      const float* src = data.data() + b * plane_size() + static_cast<std::size_t>(y0 + y) * width + x0;
      std::copy(src, src + w, &out.at(b, y, 0));
    }
  }
  return out;
}

namespace {

void require_divisible(int width, int height, int side) {
  if (width % side != 0 || height % side != 0) {
    throw Error(ErrorCode::DimensionNotDivisible, std::to_string(width) + "x" + std::to_string(height) +
                                                      " is not a multiple of the " + std::to_string(side) +
                                                      "-pixel pattern");
  }
}

}  // namespace

HyperCube m2c_resample(const MosaicImage& mi) {
  if (mi.phase != Phase{}) {
    throw Error(ErrorCode::PhaseMismatch, "mosaic phase must be (0,0) for cube conversion");
  }
  const int side = mi.pattern.side();
  require_divisible(mi.width, mi.height, side);
  HyperCube cube(mi.pattern.band_count(), mi.width / side, mi.height / side, mi.pattern.wavelengths_nm);
  m2c_gather<float>(mi.data, mi.height, mi.width, mi.pattern, cube.data);
  return cube;
}

MosaicImage cube_to_mosaic(const HyperCube& cube, const MosaicPattern& pattern, SamplingMode mode) {
  if (cube.bands != pattern.band_count()) {
    throw Error(ErrorCode::BandCountMismatch, "cube has " + std::to_string(cube.bands) + " bands, pattern has " +
                                                  std::to_string(pattern.band_count()));
  }
  const int side = pattern.side();
  if (mode == SamplingMode::Simulate) {
    MosaicImage mi(cube.width, cube.height, pattern);
    for (int y = 0; y < cube.height; ++y) {
      for (int x = 0; x < cube.width; ++x) mi.at(y, x) = cube.at(pattern.band(y % side, x % side), y, x);
    }
    return mi;
  }
  MosaicImage mi(cube.width * side, cube.height * side, pattern);
  for (int z = 0; z < cube.bands; ++z) {
    const auto [row, col] = pattern.cell_of(z);
    for (int y = 0; y < cube.height; ++y) {
      for (int x = 0; x < cube.width; ++x) mi.at(y * side + row, x * side + col) = cube.at(z, y, x);
    }
  }
  return mi;
}

MosaicImage extract_patch(const MosaicImage& mi, int x0, int y0, int w, int h) {
  const int side = mi.pattern.side();
  if ((x0 + mi.phase.col) % side != 0 || (y0 + mi.phase.row) % side != 0 || w % side != 0 || h % side != 0) {
    throw Error(ErrorCode::MisalignedPatch, "patch origin and size must align with the " + std::to_string(side) +
                                                "-pixel pattern grid");
  }
  if (x0 < 0 || y0 < 0 || w <= 0 || h <= 0 || x0 + w > mi.width || y0 + h > mi.height) {
    throw Error(ErrorCode::OutOfBounds, "patch outside image");
  }
  MosaicImage out(w, h, mi.pattern);
  for (int y = 0; y < h; ++y) {
    const float* src = mi.data.data() + static_cast<std::size_t>(y0 + y) * mi.width + x0;
    std::copy(src, src + w, &out.at(y, 0));
  }
  return out;
}

MosaicImage average_frames(std::span<const MosaicImage> frames) {
  if (frames.empty()) throw Error(ErrorCode::EmptyInput, "no frames to average");
  const MosaicImage& first = frames.front();
  std::vector<double> sum(first.data.size(), 0.0);
  for (const MosaicImage& f : frames) {
    if (f.width != first.width || f.height != first.height || f.pattern != first.pattern || f.phase != first.phase) {
      throw Error(ErrorCode::ShapeMismatch, "frames differ in size or pattern");
    }
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += f.data[i];
  }
  MosaicImage out = first;
  const double n = static_cast<double>(frames.size());
  for (std::size_t i = 0; i < sum.size(); ++i) out.data[i] = static_cast<float>(sum[i] / n);
  return out;
}

}  // namespace hsd
