#pragma once

#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "hsdemosaic/mosaic.hpp"

namespace hsd {

/// Spatially invariant linear spectral mixing. mixing[i * size + j] is the
/// fraction of band-j signal that leaks into the band-i channel.
struct CrosstalkMatrix {
  int size = 0;
  std::vector<double> mixing;

  static CrosstalkMatrix identity(int size);
  static CrosstalkMatrix from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  double at(int i, int j) const { return mixing[static_cast<std::size_t>(i) * size + j]; }
  /// 2-norm condition number; infinity for singular matrices.
  double condition_number() const;
};

struct WhiteCorrectOptions {
  double epsilon = 1e-6;
  double clip_max = 2.0;
};

struct WhiteCorrectResult {
  MosaicImage image;
  /// Pixels where white - dark <= epsilon; they are written as 0.
  std::size_t degenerate_pixels = 0;
};

/// out = clamp((raw - dark) / (white - dark), 0, clip_max).
WhiteCorrectResult white_correct(const MosaicImage& raw, const MosaicImage& white,
                                 const std::optional<MosaicImage>& dark = std::nullopt,
                                 const WhiteCorrectOptions& options = {});

/// Forward model: every pixel spectrum s becomes mixing * s.
HyperCube apply_mixing(const HyperCube& cube, const CrosstalkMatrix& m);

/// Inverts the mixing per pixel and clips negative reflectance to zero.
HyperCube crosstalk_correct(const HyperCube& cube, const CrosstalkMatrix& m);

/// Normalized 1D Gaussian taps, radius ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian blur with edge replication, applied to one plane.
void gaussian_smooth_plane(std::span<const float> in, std::span<float> out, int width, int height, double sigma);

HyperCube gaussian_smooth(const HyperCube& cube, double sigma);
MosaicImage gaussian_smooth(const MosaicImage& image, double sigma);

}  // namespace hsd
