#include "hsdemosaic/classical.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>

#include "hsdemosaic/error.hpp"

namespace hsd {

namespace {

constexpr double kCatmullRomA = -0.5;

struct Lattice {
  int side;
  int row0;  // first row holding the band
  int col0;
  int rows;  // samples per column
  int cols;  // samples per row
};

void require_divisible(const MosaicImage& mi) {
  const int side = mi.pattern.side();
  if (mi.width % side != 0 || mi.height % side != 0) {
    throw Error(ErrorCode::DimensionNotDivisible,
                std::to_string(mi.width) + "x" + std::to_string(mi.height) + " is not a multiple of the pattern");
  }
}

Lattice lattice_of(const MosaicImage& mi, int band) {
  const int side = mi.pattern.side();
  const auto [r, c] = mi.pattern.cell_of(band);
  const int row0 = ((r - mi.phase.row) % side + side) % side;
  const int col0 = ((c - mi.phase.col) % side + side) % side;
  return {side, row0, col0, mi.height / side, mi.width / side};
}

// Fills `out` by bilinear interpolation of the lattice samples of `plane`.
void lattice_bilinear(std::span<const float> plane, int width, int height, const Lattice& lat, std::span<float> out) {
  auto sample = [&](int i, int j) {
    return static_cast<double>(plane[static_cast<std::size_t>(lat.row0 + i * lat.side) * width + lat.col0 + j * lat.side]);
  };
  for (int y = 0; y < height; ++y) {
    const double ty = std::clamp(static_cast<double>(y - lat.row0) / lat.side, 0.0, static_cast<double>(lat.rows - 1));
    const int i0 = static_cast<int>(std::floor(ty));
    const int i1 = std::min(i0 + 1, lat.rows - 1);
    const double fy = ty - i0;
    for (int x = 0; x < width; ++x) {
      const double tx =
          std::clamp(static_cast<double>(x - lat.col0) / lat.side, 0.0, static_cast<double>(lat.cols - 1));
      const int j0 = static_cast<int>(std::floor(tx));
      const int j1 = std::min(j0 + 1, lat.cols - 1);
      const double fx = tx - j0;
      const double top = (1.0 - fx) * sample(i0, j0) + fx * sample(i0, j1);
      const double bottom = (1.0 - fx) * sample(i1, j0) + fx * sample(i1, j1);
      out[static_cast<std::size_t>(y) * width + x] = static_cast<float>((1.0 - fy) * top + fy * bottom);
    }
  }
}

std::array<double, 4> catmull_rom_weights(double f) {
  const double a = kCatmullRomA;
  const double f2 = f * f;
  const double f3 = f2 * f;
  return {a * f3 - 2.0 * a * f2 + a * f,
          (a + 2.0) * f3 - (a + 3.0) * f2 + 1.0,
          -(a + 2.0) * f3 + (2.0 * a + 3.0) * f2 - a * f,
          -a * f3 + a * f2};
}

void lattice_bicubic(std::span<const float> plane, int width, int height, const Lattice& lat, std::span<float> out) {
  auto sample = [&](int i, int j) {
    i = std::clamp(i, 0, lat.rows - 1);
    j = std::clamp(j, 0, lat.cols - 1);
    return static_cast<double>(plane[static_cast<std::size_t>(lat.row0 + i * lat.side) * width + lat.col0 + j * lat.side]);
  };
  for (int y = 0; y < height; ++y) {
    const double ty = static_cast<double>(y - lat.row0) / lat.side;
    const int i0 = static_cast<int>(std::floor(ty));
    const auto wy = catmull_rom_weights(ty - i0);
    for (int x = 0; x < width; ++x) {
      const double tx = static_cast<double>(x - lat.col0) / lat.side;
      const int j0 = static_cast<int>(std::floor(tx));
      const auto wx = catmull_rom_weights(tx - j0);
      double acc = 0.0;
      for (int a = 0; a < 4; ++a) {
        double row = 0.0;
        for (int b = 0; b < 4; ++b) row += wx[static_cast<std::size_t>(b)] * sample(i0 - 1 + a, j0 - 1 + b);
        acc += wy[static_cast<std::size_t>(a)] * row;
      }
      out[static_cast<std::size_t>(y) * width + x] = static_cast<float>(acc);
    }
  }
}

std::size_t clamp_negative(HyperCube& cube) {
  std::size_t count = 0;
  for (float& v : cube.data) {
    if (v < 0.0f) {
      v = 0.0f;
      ++count;
    }
  }
  return count;
}

}  // namespace

std::optional<ClassicalMethod> parse_classical_method(std::string_view name) {
  if (name == "bilinear") return ClassicalMethod::Bilinear;
  if (name == "bicubic") return ClassicalMethod::Bicubic;
  if (name == "intdiff") return ClassicalMethod::IntensityDifference;
  return std::nullopt;
}

HyperCube demosaic_bilinear(const MosaicImage& mi) {
  require_divisible(mi);
  HyperCube out(mi.pattern.band_count(), mi.width, mi.height, mi.pattern.wavelengths_nm);
  for (int b = 0; b < out.bands; ++b) lattice_bilinear(mi.data, mi.width, mi.height, lattice_of(mi, b), out.band(b));
  return out;
}

HyperCube demosaic_bicubic(const MosaicImage& mi, DemosaicStats* stats) {
  require_divisible(mi);
  HyperCube out(mi.pattern.band_count(), mi.width, mi.height, mi.pattern.wavelengths_nm);
  for (int b = 0; b < out.bands; ++b) lattice_bicubic(mi.data, mi.width, mi.height, lattice_of(mi, b), out.band(b));
  const std::size_t clamped = clamp_negative(out);
  if (stats) stats->clamped_values = clamped;
  return out;
}

// Out-of-range taps are replaced by the nearest in-range pixel of the same
// mosaic band, so every window still holds one sample of each band.
std::vector<float> pseudo_panchromatic(const MosaicImage& mi) {
  const int side = mi.pattern.side();
  const int lo = -1;
  const int hi = side - 2;
  const double norm = 1.0 / (side * side);
  auto replicate = [side](int i, int n) {
    while (i < 0) i += side;
    while (i >= n) i -= side;
    return i;
  };
  std::vector<float> intensity(mi.data.size());
  for (int y = 0; y < mi.height; ++y) {
    for (int x = 0; x < mi.width; ++x) {
      double acc = 0.0;
      for (int dy = lo; dy <= hi; ++dy) {
        const int yy = replicate(y + dy, mi.height);
        for (int dx = lo; dx <= hi; ++dx) acc += mi.at(yy, replicate(x + dx, mi.width));
      }
      intensity[static_cast<std::size_t>(y) * mi.width + x] = static_cast<float>(acc * norm);
    }
  }
  return intensity;
}

HyperCube demosaic_intensity_difference(const MosaicImage& mi, DemosaicStats* stats) {
  require_divisible(mi);
  const std::vector<float> intensity = pseudo_panchromatic(mi);
  std::vector<float> difference(mi.data.size());
  for (std::size_t i = 0; i < difference.size(); ++i) difference[i] = mi.data[i] - intensity[i];

  HyperCube out(mi.pattern.band_count(), mi.width, mi.height, mi.pattern.wavelengths_nm);
  std::vector<float> dense(mi.data.size());
  for (int b = 0; b < out.bands; ++b) {
    lattice_bilinear(difference, mi.width, mi.height, lattice_of(mi, b), dense);
    auto band = out.band(b);
    for (std::size_t i = 0; i < dense.size(); ++i) band[i] = intensity[i] + dense[i];
  }
  const std::size_t clamped = clamp_negative(out);
  if (stats) stats->clamped_values = clamped;
  return out;
}

HyperCube demosaic(const MosaicImage& mi, ClassicalMethod method) {
  switch (method) {
    case ClassicalMethod::Bilinear: return demosaic_bilinear(mi);
    case ClassicalMethod::Bicubic: return demosaic_bicubic(mi);
    case ClassicalMethod::IntensityDifference: return demosaic_intensity_difference(mi);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown demosaicing method");
}

}  // namespace hsd
