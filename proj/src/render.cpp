#include "hsdemosaic/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include <png.h>

#include "cie_tables.hpp"
#include "hsdemosaic/error.hpp"
#include "hsdemosaic/io.hpp"

namespace hsd {

namespace {

constexpr double kD65White[3] = {0.95047, 1.0, 1.08883};

// Linear XYZ -> linear sRGB (IEC 61966-2-1).
constexpr double kXyzToSrgb[3][3] = {
    {3.2404542, -1.5371385, -0.4985314},
    {-0.9692660, 1.8760108, 0.0415560},
    {0.0556434, -0.2040259, 1.0572252},
};

struct CmfSample {
  double x, y, z, illuminant;
};

CmfSample cmf_at(double nm) {
  const auto& t = cie::kTable;
  if (nm < t.front().wavelength_nm || nm > t.back().wavelength_nm) {
    throw Error(ErrorCode::WavelengthOutOfRange, std::to_string(nm) + " nm is outside the 360-830 nm CMF table");
  }
  const double pos = (nm - t.front().wavelength_nm) / 5.0;
  const auto i = std::min(static_cast<std::size_t>(pos), t.size() - 2);
  const double f = pos - static_cast<double>(i);
  auto lerp = [f](double a, double b) { return a + f * (b - a); };
  return {lerp(t[i].x_bar, t[i + 1].x_bar), lerp(t[i].y_bar, t[i + 1].y_bar), lerp(t[i].z_bar, t[i + 1].z_bar),
          lerp(t[i].d65, t[i + 1].d65)};
}

// Trapezoidal weights: half the distance to each neighbouring band.
std::vector<double> band_widths(const std::vector<double>& wl) {
  std::vector<double> w(wl.size(), 1.0);
  if (wl.size() < 2) return w;
  for (std::size_t b = 0; b < wl.size(); ++b) {
    const double lo = b == 0 ? wl[b] : 0.5 * (wl[b - 1] + wl[b]);
    const double hi = b + 1 == wl.size() ? wl[b] : 0.5 * (wl[b] + wl[b + 1]);
    w[b] = hi - lo;
  }
  return w;
}

std::uint8_t encode_srgb(double linear) {
  const double c = std::clamp(linear, 0.0, 1.0);
  const double v = c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

}  // namespace

std::vector<double> cube_to_linear_rgb(const HyperCube& cube) {
  if (cube.wavelengths_nm.size() != static_cast<std::size_t>(cube.bands)) {
    throw Error(ErrorCode::BandCountMismatch, "cube needs one wavelength per band to render");
  }
  const auto widths = band_widths(cube.wavelengths_nm);
  // Per-band XYZ weights R(l) * D65(l) * cmf(l) * dl.
  std::vector<std::array<double, 3>> weight(static_cast<std::size_t>(cube.bands));
  std::array<double, 3> white{0.0, 0.0, 0.0};
  for (int b = 0; b < cube.bands; ++b) {
    const auto s = cmf_at(cube.wavelengths_nm[static_cast<std::size_t>(b)]);
    const double k = s.illuminant * widths[static_cast<std::size_t>(b)];
    weight[static_cast<std::size_t>(b)] = {k * s.x, k * s.y, k * s.z};
    for (int c = 0; c < 3; ++c) white[static_cast<std::size_t>(c)] += weight[static_cast<std::size_t>(b)][static_cast<std::size_t>(c)];
  }
  std::array<double, 3> scale{};
  for (int c = 0; c < 3; ++c) {
    scale[static_cast<std::size_t>(c)] = white[static_cast<std::size_t>(c)] > 0.0 ? kD65White[c] / white[static_cast<std::size_t>(c)] : 0.0;
  }

  const std::size_t plane = cube.plane_size();
  std::vector<double> rgb(3 * plane);
  for (std::size_t p = 0; p < plane; ++p) {
    double xyz[3] = {0.0, 0.0, 0.0};
    for (int b = 0; b < cube.bands; ++b) {
      const double r = cube.data[static_cast<std::size_t>(b) * plane + p];
      for (int c = 0; c < 3; ++c) xyz[c] += r * weight[static_cast<std::size_t>(b)][static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < 3; ++c) xyz[c] *= scale[static_cast<std::size_t>(c)];
    for (int c = 0; c < 3; ++c) {
      rgb[static_cast<std::size_t>(c) * plane + p] =
          kXyzToSrgb[c][0] * xyz[0] + kXyzToSrgb[c][1] * xyz[1] + kXyzToSrgb[c][2] * xyz[2];
    }
  }
  return rgb;
}

RgbImage cube_to_rgb(const HyperCube& cube) {
  const auto linear = cube_to_linear_rgb(cube);
  const std::size_t plane = cube.plane_size();
  RgbImage img{cube.width, cube.height, std::vector<std::uint8_t>(3 * plane)};
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < 3; ++c) img.pixels[3 * p + c] = encode_srgb(linear[c * plane + p]);
  }
  return img;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const RgbImage& image, const std::filesystem::path& path) {
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
    throw Error(ErrorCode::ShapeMismatch, "RGB buffer does not match image size");
  }
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "PNG encoding failed for " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, image.pixels.data() + static_cast<std::size_t>(y) * image.width * 3);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

RgbImage read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error(ErrorCode::IoError, "cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  RgbImage out{static_cast<int>(image.width), static_cast<int>(image.height),
               std::vector<std::uint8_t>(PNG_IMAGE_SIZE(image))};
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(ErrorCode::IoError, "cannot decode PNG " + path.string() + ": " + image.message);
  }
  return out;
}

void write_band_pgm(const HyperCube& cube, int band, const std::filesystem::path& path) {
  if (band < 0 || band >= cube.bands) {
    throw Error(ErrorCode::OutOfBounds, "band " + std::to_string(band) + " outside 0.." + std::to_string(cube.bands - 1));
  }
  io::write_pgm16(cube.band(band), cube.width, cube.height, path);
}

}  // namespace hsd
