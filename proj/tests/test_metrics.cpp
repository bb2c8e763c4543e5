#include <doctest.h>

#include <cmath>

#include "hsdemosaic/metrics.hpp"
#include "ssim_oracle.hpp"
#include "test_util.hpp"

using namespace hsd;
using test::code_of;

TEST_CASE("psnr of a uniform offset") {
  std::mt19937_64 rng(1);
  std::vector<float> truth(400), pred(400);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    truth[i] = 0.8f * test::uniform01(rng);
    pred[i] = truth[i] + 0.1f;
  }
  CHECK(psnr(pred, truth) == doctest::Approx(20.0).epsilon(1e-5));
  CHECK(psnr(pred, truth, 2.0) == doctest::Approx(20.0 + 20.0 * std::log10(2.0)).epsilon(1e-5));
  CHECK(psnr(truth, truth) == kPsnrCapDb);
  CHECK(psnr(truth, truth, 1.0, 60.0) == 60.0);
  pred = truth;
  pred[0] += 1e-7f;
  CHECK(psnr(pred, truth) == kPsnrCapDb);
  CHECK(code_of([&] { psnr(std::span(pred).first(3), truth); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("ssim of identical images is one") {
  std::mt19937_64 rng(2);
  std::vector<float> a(30 * 20);
  for (float& v : a) v = test::uniform01(rng);
  CHECK(ssim(a, a, 30, 20) == doctest::Approx(1.0).epsilon(1e-9));
  std::vector<float> flat(30 * 20, 0.4f);
  CHECK(ssim(flat, flat, 30, 20) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("ssim matches a direct windowed computation") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const int w = 11 + trial * 7, h = 25 - trial * 2;
    std::vector<float> a(static_cast<std::size_t>(w * h)), b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = test::uniform01(rng);
      b[i] = std::clamp(a[i] + 0.3f * (test::uniform01(rng) - 0.5f), 0.0f, 1.0f);
    }
    const double ours = ssim(a, b, w, h);
    CHECK(std::abs(ours - test::naive_ssim(a, b, w, h)) < 1e-6);
    CHECK(ours < 0.99);
    CHECK(ssim(a, b, w, h) == doctest::Approx(ssim(b, a, w, h)).epsilon(1e-12));
  }
}

TEST_CASE("ssim needs a full window") {
  std::vector<float> a(10 * 40, 0.5f);
  CHECK(code_of([&] { ssim(a, a, 10, 40); }) == ErrorCode::ImageTooSmall);
  CHECK(code_of([&] { ssim(a, a, 20, 40); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("cube metrics are band means") {
  std::mt19937_64 rng(4);
  const HyperCube t = test::random_cube(4, 16, 16, rng);
  HyperCube p = t;
  for (float& v : p.band(1)) v += 0.1f;
  for (float& v : p.band(2)) v += 0.01f;
  const auto bands = psnr_per_band(p, t);
  REQUIRE(bands.size() == 4);
  CHECK(bands[0] == kPsnrCapDb);
  CHECK(bands[1] == doctest::Approx(20.0).epsilon(1e-4));
  CHECK(bands[2] == doctest::Approx(40.0).epsilon(1e-3));
  CHECK(psnr_cube(p, t) == doctest::Approx((bands[0] + bands[1] + bands[2] + bands[3]) / 4));

  MetricsReport r;
  r.method = "m";
  r.add(measure("a", p, t));
  r.add(measure("b", t, t));
  r.finalize();
  CHECK(r.mean_psnr == doctest::Approx((r.images[0].psnr + 100.0) / 2));
  const auto j = r.to_json();
  CHECK(j.at("method") == "m");
  CHECK(j.at("images").size() == 2);
  CHECK(j.at("images")[0].at("psnr_bands").size() == 4);
}

TEST_CASE("spectral signature") {
  HyperCube c(2, 3, 2, {500.0, 600.0});
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 3; ++x) {
      c.at(0, y, x) = static_cast<float>(x + 3 * y);
      c.at(1, y, x) = 1.0f;
    }
  }
  const std::vector<bool> mask{true, false, true, false, false, true};
  const auto s = spectral_signature(c, mask);
  REQUIRE(s.size() == 2);
  CHECK(s[0].wavelength_nm == 500.0);
  CHECK(s[0].mean_reflectance == doctest::Approx((0.0 + 2.0 + 5.0) / 3));
  CHECK(s[1].mean_reflectance == doctest::Approx(1.0));
  CHECK(code_of([&] { spectral_signature(c, std::vector<bool>(6, false)); }) == ErrorCode::EmptyRegion);
  CHECK(code_of([&] { spectral_signature(c, std::vector<bool>(5, true)); }) == ErrorCode::ShapeMismatch);
}
