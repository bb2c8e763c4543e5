#include "hsdemosaic/metrics.hpp"

#include <cmath>
#include <numeric>

#include "hsdemosaic/calibration.hpp"
#include "hsdemosaic/error.hpp"

namespace hsd {

namespace {

void require_same(std::size_t a, std::size_t b) {
  if (a != b || a == 0) throw Error(ErrorCode::ShapeMismatch, "metric inputs differ in size or are empty");
}

void require_same(const HyperCube& a, const HyperCube& b) {
  if (a.bands != b.bands || a.width != b.width || a.height != b.height) {
    throw Error(ErrorCode::ShapeMismatch, "cubes differ in shape");
  }
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

// Valid-region separable filtering with a normalized Gaussian window.
std::vector<double> filter_valid(const std::vector<double>& plane, int width, int height, const std::vector<double>& taps) {
  const int k = static_cast<int>(taps.size());
  const int ow = width - k + 1;
  const int oh = height - k + 1;
  std::vector<double> rows(static_cast<std::size_t>(ow) * height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += taps[static_cast<std::size_t>(i)] * plane[static_cast<std::size_t>(y) * width + x + i];
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += taps[static_cast<std::size_t>(i)] * rows[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

std::vector<double> window_taps(const SsimOptions& o) {
  std::vector<double> taps(static_cast<std::size_t>(o.window));
  const double c = (o.window - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < o.window; ++i) {
    taps[static_cast<std::size_t>(i)] = std::exp(-0.5 * (i - c) * (i - c) / (o.sigma * o.sigma));
    sum += taps[static_cast<std::size_t>(i)];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

}  // namespace

double psnr(std::span<const float> pred, std::span<const float> truth, double max_val, double cap_db) {
  require_same(pred.size(), truth.size());
  if (!(max_val > 0.0)) throw Error(ErrorCode::InvalidConfig, "PSNR max_val must be positive");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(truth[i]);
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(pred.size());
  if (mse == 0.0) return cap_db;
  return std::min(cap_db, 10.0 * std::log10(max_val * max_val / mse));
}

double ssim(std::span<const float> pred, std::span<const float> truth, int width, int height, const SsimOptions& o) {
  require_same(pred.size(), truth.size());
  if (pred.size() != static_cast<std::size_t>(width) * height) throw Error(ErrorCode::ShapeMismatch, "plane size mismatch");
  if (width < o.window || height < o.window) {
    throw Error(ErrorCode::ImageTooSmall, "SSIM needs at least " + std::to_string(o.window) + " pixels per side");
  }
  const std::size_t n = pred.size();
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = pred[i];
    y[i] = truth[i];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto taps = window_taps(o);
  const auto mx = filter_valid(x, width, height, taps);
  const auto my = filter_valid(y, width, height, taps);
  const auto mxx = filter_valid(xx, width, height, taps);
  const auto myy = filter_valid(yy, width, height, taps);
  const auto mxy = filter_valid(xy, width, height, taps);
  const double c1 = (o.k1 * o.max_val) * (o.k1 * o.max_val);
  const double c2 = (o.k2 * o.max_val) * (o.k2 * o.max_val);
  double acc = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = mxx[i] - mx[i] * mx[i];
    const double vy = myy[i] - my[i] * my[i];
    const double cov = mxy[i] - mx[i] * my[i];
    acc += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
           ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return acc / static_cast<double>(mx.size());
}

std::vector<double> psnr_per_band(const HyperCube& pred, const HyperCube& truth, double max_val, double cap_db) {
  require_same(pred, truth);
  std::vector<double> out;
  for (int b = 0; b < pred.bands; ++b) out.push_back(psnr(pred.band(b), truth.band(b), max_val, cap_db));
  return out;
}

std::vector<double> ssim_per_band(const HyperCube& pred, const HyperCube& truth, const SsimOptions& options) {
  require_same(pred, truth);
  std::vector<double> out;
  for (int b = 0; b < pred.bands; ++b) out.push_back(ssim(pred.band(b), truth.band(b), pred.width, pred.height, options));
  return out;
}

double psnr_cube(const HyperCube& pred, const HyperCube& truth, double max_val, double cap_db) {
  return mean(psnr_per_band(pred, truth, max_val, cap_db));
}

double ssim_cube(const HyperCube& pred, const HyperCube& truth, const SsimOptions& options) {
  return mean(ssim_per_band(pred, truth, options));
}

std::vector<SignaturePoint> spectral_signature(const HyperCube& cube, const std::vector<bool>& mask) {
  if (mask.size() != cube.plane_size()) throw Error(ErrorCode::ShapeMismatch, "mask does not match cube plane");
  const auto count = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  if (count == 0) throw Error(ErrorCode::EmptyRegion, "signature mask selects no pixels");
  std::vector<SignaturePoint> out;
  for (int b = 0; b < cube.bands; ++b) {
    const auto band = cube.band(b);
    double acc = 0.0;
    for (std::size_t i = 0; i < band.size(); ++i) {
      if (mask[i]) acc += band[i];
    }
    const double wl = static_cast<std::size_t>(b) < cube.wavelengths_nm.size() ? cube.wavelengths_nm[static_cast<std::size_t>(b)] : 0.0;
    out.push_back({wl, acc / static_cast<double>(count)});
  }
  return out;
}

ImageMetrics measure(std::string id, const HyperCube& pred, const HyperCube& truth, const SsimOptions& options) {
  ImageMetrics m;
  m.id = std::move(id);
  m.psnr_bands = psnr_per_band(pred, truth, options.max_val);
  m.ssim_bands = ssim_per_band(pred, truth, options);
  m.psnr = mean(m.psnr_bands);
  m.ssim = mean(m.ssim_bands);
  return m;
}

void MetricsReport::add(ImageMetrics m) {
  images.push_back(std::move(m));
  finalize();
}

void MetricsReport::finalize() {
  if (images.empty()) {
    mean_psnr = mean_ssim = 0.0;
    return;
  }
  double p = 0.0, s = 0.0;
  for (const auto& im : images) {
    p += im.psnr;
    s += im.ssim;
  }
  mean_psnr = p / static_cast<double>(images.size());
  mean_ssim = s / static_cast<double>(images.size());
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json per_image = nlohmann::json::array();
  for (const auto& im : images) {
    per_image.push_back({{"id", im.id},
                         {"psnr", im.psnr},
                         {"ssim", im.ssim},
                         {"psnr_bands", im.psnr_bands},
                         {"ssim_bands", im.ssim_bands}});
  }
  return {{"method", method},
          {"image_count", images.size()},
          {"mean_psnr", mean_psnr},
          {"mean_ssim", mean_ssim},
          {"images", per_image}};
}

}  // namespace hsd
