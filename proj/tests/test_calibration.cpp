#include <doctest.h>

#include <cmath>

#include "hsdemosaic/calibration.hpp"
#include "hsdemosaic/error.hpp"
#include "test_util.hpp"

using namespace hsd;

namespace {

double total_variation(std::span<const float> img, int w, int h) {
  double tv = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float v = img[static_cast<std::size_t>(y) * w + x];
      if (x + 1 < w) tv += std::abs(img[static_cast<std::size_t>(y) * w + x + 1] - v);
      if (y + 1 < h) tv += std::abs(img[static_cast<std::size_t>(y + 1) * w + x] - v);
    }
  }
  return tv;
}

CrosstalkMatrix random_mixing(int n, std::mt19937_64& rng) {
  CrosstalkMatrix m = CrosstalkMatrix::identity(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j) m.mixing[static_cast<std::size_t>(i) * n + j] = 0.05 * test::uniform01(rng);
    }
  }
  return m;
}

}  // namespace

TEST_CASE("white correction arithmetic") {
  const MosaicPattern p = MosaicPattern::standard();
  CHECK(white_correct(MosaicImage(4, 4, p, 0.5f), MosaicImage(4, 4, p, 1.0f)).image.data[0] == doctest::Approx(0.5));
  const auto r = white_correct(MosaicImage(4, 4, p, 0.6f), MosaicImage(4, 4, p, 0.8f), MosaicImage(4, 4, p, 0.2f));
  for (float v : r.image.data) CHECK(v == doctest::Approx(0.4 / 0.6).epsilon(1e-6));
  const auto zero = white_correct(MosaicImage(4, 4, p, 0.2f), MosaicImage(4, 4, p, 0.9f), MosaicImage(4, 4, p, 0.2f));
  for (float v : zero.image.data) CHECK(v == 0.0f);

  // White corrected by itself is 1 everywhere.
  auto& rng = test::shared_rng();
  MosaicImage white = test::random_mosaic(8, 8, rng);
  for (float& v : white.data) v += 0.1f;
  for (float v : white_correct(white, white).image.data) CHECK(v == doctest::Approx(1.0));

  // Overshoot clips at clip_max, negatives at 0.
  const auto hot = white_correct(MosaicImage(4, 4, p, 5.0f), MosaicImage(4, 4, p, 1.0f));
  CHECK(hot.image.data[0] == doctest::Approx(2.0));
  const auto cold = white_correct(MosaicImage(4, 4, p, 0.1f), MosaicImage(4, 4, p, 1.0f), MosaicImage(4, 4, p, 0.3f));
  CHECK(cold.image.data[0] == 0.0f);
}

TEST_CASE("degenerate white pixels are zeroed and counted") {
  const MosaicPattern p = MosaicPattern::standard();
  MosaicImage white(4, 4, p, 1.0f);
  white.at(1, 2) = 0.0f;
  white.at(3, 3) = 1e-8f;
  const auto r = white_correct(MosaicImage(4, 4, p, 0.5f), white);
  CHECK(r.degenerate_pixels == 2);
  CHECK(r.image.at(1, 2) == 0.0f);
  CHECK(r.image.at(0, 0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(white_correct(MosaicImage(4, 4, p), MosaicImage(8, 4, p, 1.0f)), Error);
}

TEST_CASE("crosstalk correction") {
  auto& rng = test::shared_rng();
  const HyperCube cube = test::random_cube(16, 6, 5, rng);
  CHECK(crosstalk_correct(cube, CrosstalkMatrix::identity(16)).data == cube.data);

  CrosstalkMatrix two = CrosstalkMatrix::identity(16);
  for (double& v : two.mixing) v *= 2.0;
  HyperCube flat(16, 2, 2, cube.wavelengths_nm, 0.4f);
  for (float v : crosstalk_correct(flat, two).data) CHECK(v == doctest::Approx(0.2));

  for (int trial = 0; trial < 5; ++trial) {
    const CrosstalkMatrix m = random_mixing(16, rng);
    CHECK(m.condition_number() < 1e3);
    const HyperCube back = crosstalk_correct(apply_mixing(cube, m), m);
    for (std::size_t i = 0; i < cube.data.size(); ++i) CHECK(back.data[i] == doctest::Approx(cube.data[i]).epsilon(1e-5));
  }

  CrosstalkMatrix singular = CrosstalkMatrix::identity(16);
  for (int j = 0; j < 16; ++j) singular.mixing[static_cast<std::size_t>(15) * 16 + j] = singular.mixing[j];
  singular.mixing[15 * 16 + 15] = 1.0;
  singular.mixing[15 * 16 + 0] = 0.0;
  for (int j = 0; j < 16; ++j) singular.mixing[static_cast<std::size_t>(14) * 16 + j] = singular.mixing[static_cast<std::size_t>(15) * 16 + j];
  CHECK_THROWS_AS(crosstalk_correct(cube, singular), Error);
  CHECK_THROWS_AS(crosstalk_correct(cube, CrosstalkMatrix::identity(8)), Error);
}

TEST_CASE("crosstalk matrix JSON") {
  const auto j = nlohmann::json::parse(R"({"size":2,"mixing":[[1.0,0.1],[0.2,0.9]]})");
  const CrosstalkMatrix m = CrosstalkMatrix::from_json(j);
  CHECK(m.at(1, 0) == doctest::Approx(0.2));
  CHECK(CrosstalkMatrix::from_json(m.to_json()).mixing == m.mixing);
  CHECK_THROWS_AS(CrosstalkMatrix::from_json(nlohmann::json::parse(R"({"size":2,"mixing":[[0.0,0.1],[0.2,0.9]]})")), Error);
}

TEST_CASE("gaussian kernel and smoothing") {
  const auto k = gaussian_kernel(1.5);
  CHECK(k.size() == 11);  // radius ceil(4.5) = 5
  double sum = 0.0;
  for (double v : k) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(gaussian_kernel(0.0), Error);
  CHECK_THROWS_AS(gaussian_kernel(-1.0), Error);

  // Impulse response: center is the squared normalized 1D peak, total mass 1.
  double norm = 0.0;
  for (int i = -5; i <= 5; ++i) norm += std::exp(-0.5 * i * i / 2.25);
  const double peak = 1.0 / norm;
  std::vector<float> impulse(31 * 31, 0.0f), out(31 * 31);
  impulse[15 * 31 + 15] = 1.0f;
  gaussian_smooth_plane(impulse, out, 31, 31, 1.5);
  CHECK(out[15 * 31 + 15] == doctest::Approx(peak * peak).epsilon(1e-6));
  double mass = 0.0;
  for (float v : out) mass += v;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));

  HyperCube flat(3, 9, 7, {500.0, 550.0, 600.0}, 0.37f);
  for (float v : gaussian_smooth(flat, 1.5).data) CHECK(v == doctest::Approx(0.37).epsilon(1e-6));

  auto& rng = test::shared_rng();
  for (int trial = 0; trial < 10; ++trial) {
    const MosaicImage img = test::random_mosaic(24, 20, rng);
    const MosaicImage sm = gaussian_smooth(img, 1.0 + 0.2 * trial);
    CHECK(total_variation(sm.data, 24, 20) <= total_variation(img.data, 24, 20));
  }
}

TEST_CASE("smoothing keeps the band mean of an image padded by its border value") {
  auto& rng = test::shared_rng();
  // Random interior surrounded by a constant frame wider than the kernel radius.
  const int w = 40, h = 40, pad = 12;
  std::vector<float> img(static_cast<std::size_t>(w) * h, 0.3f), out(img.size());
  for (int y = pad; y < h - pad; ++y) {
    for (int x = pad; x < w - pad; ++x) img[static_cast<std::size_t>(y) * w + x] = test::uniform01(rng);
  }
  gaussian_smooth_plane(img, out, w, h, 1.5);
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    a += img[i];
    b += out[i];
  }
  CHECK(std::abs(a - b) / static_cast<double>(img.size()) < 1e-4);
}
