#pragma once

#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hsdemosaic/mosaic.hpp"

namespace hsd {

inline constexpr double kPsnrCapDb = 100.0;

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double max_val = 1.0;
};

/// 10 log10(max^2 / MSE); identical inputs return the cap.
double psnr(std::span<const float> pred, std::span<const float> truth, double max_val = 1.0,
            double cap_db = kPsnrCapDb);

/// Mean SSIM over all positions where the Gaussian window fits entirely
/// inside a width x height plane.
double ssim(std::span<const float> pred, std::span<const float> truth, int width, int height,
            const SsimOptions& options = {});

std::vector<double> psnr_per_band(const HyperCube& pred, const HyperCube& truth, double max_val = 1.0,
                                  double cap_db = kPsnrCapDb);
std::vector<double> ssim_per_band(const HyperCube& pred, const HyperCube& truth, const SsimOptions& options = {});
double psnr_cube(const HyperCube& pred, const HyperCube& truth, double max_val = 1.0, double cap_db = kPsnrCapDb);
double ssim_cube(const HyperCube& pred, const HyperCube& truth, const SsimOptions& options = {});

struct SignaturePoint {
  double wavelength_nm;
  double mean_reflectance;
};

/// Per-band mean over the pixels where `mask` (row-major [height x width])
/// is true.
std::vector<SignaturePoint> spectral_signature(const HyperCube& cube, const std::vector<bool>& mask);

/// Per-image, per-band and corpus-level metric aggregates.
struct ImageMetrics {
  std::string id;
  std::vector<double> psnr_bands;
  std::vector<double> ssim_bands;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricsReport {
  std::string method;
  std::vector<ImageMetrics> images;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;

  void add(ImageMetrics m);
  /// Recomputes corpus means from the per-image values.
  void finalize();
  nlohmann::json to_json() const;
};

ImageMetrics measure(std::string id, const HyperCube& pred, const HyperCube& truth, const SsimOptions& options = {});

}  // namespace hsd
