#include <doctest.h>

#include <cmath>
#include <fstream>

#include "hsdemosaic/io.hpp"
#include "hsdemosaic/render.hpp"
#include "test_util.hpp"

using namespace hsd;
using test::code_of;

namespace {

HyperCube uniform_cube(const std::vector<double>& wl, const std::function<float(double)>& reflectance) {
  HyperCube c(static_cast<int>(wl.size()), 4, 3, wl);
  for (int b = 0; b < c.bands; ++b) {
    for (float& v : c.band(b)) v = reflectance(wl[static_cast<std::size_t>(b)]);
  }
  return c;
}

std::vector<double> dense_wavelengths() {
  std::vector<double> wl;
  for (double nm = 400.0; nm <= 700.0; nm += 10.0) wl.push_back(nm);
  return wl;
}

}  // namespace

TEST_CASE("unit reflectance renders white") {
  for (const auto& wl : {MosaicPattern::standard().wavelengths_nm, dense_wavelengths()}) {
    const HyperCube c = uniform_cube(wl, [](double) { return 1.0f; });
    const auto lin = cube_to_linear_rgb(c);
    for (double v : lin) CHECK(v == doctest::Approx(1.0).epsilon(2e-3));
    const RgbImage img = cube_to_rgb(c);
    CHECK(img.at(2, 3) == std::array<std::uint8_t, 3>{255, 255, 255});
  }
}

TEST_CASE("grey reflectance stays neutral and follows the sRGB curve") {
  const HyperCube c = uniform_cube(dense_wavelengths(), [](double) { return 0.18f; });
  const auto px = cube_to_rgb(c).at(0, 0);
  CHECK(px[0] == px[1]);
  CHECK(px[1] == px[2]);
  // sRGB encoding of 0.18 is 0.4613 -> 118.
  CHECK(std::abs(static_cast<int>(px[1]) - 118) <= 1);
  const HyperCube black = uniform_cube(dense_wavelengths(), [](double) { return 0.0f; });
  CHECK(cube_to_rgb(black).at(1, 1) == std::array<std::uint8_t, 3>{0, 0, 0});
}

TEST_CASE("spectral hue ordering") {
  auto dominant = [](double lo, double hi) {
    const HyperCube c = uniform_cube(dense_wavelengths(), [=](double nm) { return nm >= lo && nm <= hi ? 0.9f : 0.05f; });
    const auto px = cube_to_rgb(c).at(0, 0);
    return static_cast<int>(std::max_element(px.begin(), px.end()) - px.begin());
  };
  CHECK(dominant(420, 480) == 2);
  CHECK(dominant(510, 560) == 1);
  CHECK(dominant(610, 700) == 0);
}

TEST_CASE("render rejects bad input") {
  HyperCube c(2, 2, 2, {300.0, 500.0});
  CHECK(code_of([&] { cube_to_rgb(c); }) == ErrorCode::WavelengthOutOfRange);
  c.wavelengths_nm = {500.0};
  CHECK(code_of([&] { cube_to_rgb(c); }) == ErrorCode::BandCountMismatch);
  c.wavelengths_nm = {500.0, 600.0};
  const auto dir = test::scratch_dir("render_err");
  CHECK(code_of([&] { write_band_pgm(c, 2, dir / "x.pgm"); }) == ErrorCode::OutOfBounds);
  CHECK(code_of([&] { read_png(dir / "missing.png"); }) == ErrorCode::IoError);
}

TEST_CASE("png round trip") {
  std::mt19937_64 rng(8);
  RgbImage img{7, 5, std::vector<std::uint8_t>(7 * 5 * 3)};
  for (auto& v : img.pixels) v = static_cast<std::uint8_t>(rng() & 0xff);
  const auto dir = test::scratch_dir("png");
  write_png(img, dir / "a.png");
  const RgbImage back = read_png(dir / "a.png");
  CHECK(back.width == 7);
  CHECK(back.height == 5);
  CHECK(back.pixels == img.pixels);
  std::ifstream f(dir / "a.png", std::ios::binary);
  char sig[4] = {};
  f.read(sig, 4);
  CHECK(std::string(sig + 1, 3) == "PNG");
}

TEST_CASE("band pgm export") {
  std::mt19937_64 rng(9);
  const HyperCube c = test::random_cube(16, 12, 8, rng);
  const auto dir = test::scratch_dir("bandpgm");
  write_band_pgm(c, 5, dir / "b.pgm");
  const MosaicImage back = io::read_pgm16(dir / "b.pgm", MosaicPattern::standard());
  REQUIRE(back.width == 12);
  const auto band = c.band(5);
  for (std::size_t i = 0; i < band.size(); ++i) CHECK(back.data[i] == doctest::Approx(band[i]).epsilon(1.0 / 65535));
}
