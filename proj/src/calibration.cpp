#include "hsdemosaic/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "hsdemosaic/error.hpp"

namespace hsd {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RowMatrix as_matrix(const CrosstalkMatrix& m) {
  return Eigen::Map<const RowMatrix>(m.mixing.data(), m.size, m.size);
}

// out(:, p) = mat * in(:, p) for every pixel p of a band-major cube.
HyperCube transform_spectra(const HyperCube& cube, const RowMatrix& mat, bool clip_negative) {
  const auto pixels = static_cast<Eigen::Index>(cube.plane_size());
  Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> in(cube.data.data(),
                                                                                              cube.bands, pixels);
  const Eigen::MatrixXd result = mat * in.cast<double>();
  HyperCube out(cube.bands, cube.width, cube.height, cube.wavelengths_nm);
  for (int b = 0; b < cube.bands; ++b) {
    for (Eigen::Index p = 0; p < pixels; ++p) {
      double v = result(b, p);
      if (clip_negative && v < 0.0) v = 0.0;
      out.data[static_cast<std::size_t>(b) * cube.plane_size() + static_cast<std::size_t>(p)] = static_cast<float>(v);
    }
  }
  return out;
}

}  // namespace

CrosstalkMatrix CrosstalkMatrix::identity(int size) {
  CrosstalkMatrix m{size, std::vector<double>(static_cast<std::size_t>(size) * size, 0.0)};
  for (int i = 0; i < size; ++i) m.mixing[static_cast<std::size_t>(i) * size + i] = 1.0;
  return m;
}

CrosstalkMatrix CrosstalkMatrix::from_json(const nlohmann::json& j) {
  CrosstalkMatrix m;
  try {
    m.size = j.at("size").get<int>();
    const auto& rows = j.at("mixing");
    if (m.size <= 0 || rows.size() != static_cast<std::size_t>(m.size)) {
      throw Error(ErrorCode::ShapeMismatch, "crosstalk matrix must have `size` rows");
    }
    for (const auto& row : rows) {
      if (row.size() != static_cast<std::size_t>(m.size)) {
        throw Error(ErrorCode::ShapeMismatch, "crosstalk matrix must be square");
      }
      for (const auto& v : row) m.mixing.push_back(v.get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, std::string("crosstalk matrix: ") + e.what());
  }
  for (int i = 0; i < m.size; ++i) {
    if (!(m.at(i, i) > 0.0)) throw Error(ErrorCode::SingularMatrix, "crosstalk diagonal must be positive");
  }
  return m;
}

nlohmann::json CrosstalkMatrix::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < size; ++i) {
    rows.push_back(std::vector<double>(mixing.begin() + static_cast<std::ptrdiff_t>(i) * size,
                                       mixing.begin() + static_cast<std::ptrdiff_t>(i + 1) * size));
  }
  return {{"size", size}, {"mixing", rows}};
}

double CrosstalkMatrix::condition_number() const {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(as_matrix(*this));
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(s.size() - 1) == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / s(s.size() - 1);
}

WhiteCorrectResult white_correct(const MosaicImage& raw, const MosaicImage& white,
                                 const std::optional<MosaicImage>& dark, const WhiteCorrectOptions& options) {
  auto same_shape = [&](const MosaicImage& other) {
    return other.width == raw.width && other.height == raw.height && other.pattern == raw.pattern &&
           other.phase == raw.phase;
  };
  if (!same_shape(white) || (dark && !same_shape(*dark))) {
    throw Error(ErrorCode::ShapeMismatch, "raw, white and dark frames must share size and pattern");
  }
  WhiteCorrectResult result{raw, 0};
  for (std::size_t i = 0; i < raw.data.size(); ++i) {
    const double d = dark ? dark->data[i] : 0.0;
    const double denom = static_cast<double>(white.data[i]) - d;
    if (!(denom > options.epsilon)) {
      result.image.data[i] = 0.0f;
      ++result.degenerate_pixels;
      continue;
    }
    const double v = (static_cast<double>(raw.data[i]) - d) / denom;
    result.image.data[i] = static_cast<float>(std::clamp(v, 0.0, options.clip_max));
  }
  return result;
}

HyperCube apply_mixing(const HyperCube& cube, const CrosstalkMatrix& m) {
  if (cube.bands != m.size) throw Error(ErrorCode::BandCountMismatch, "crosstalk matrix size differs from band count");
  return transform_spectra(cube, as_matrix(m), false);
}

HyperCube crosstalk_correct(const HyperCube& cube, const CrosstalkMatrix& m) {
  if (cube.bands != m.size) throw Error(ErrorCode::BandCountMismatch, "crosstalk matrix size differs from band count");
  const double cond = m.condition_number();
  if (!std::isfinite(cond)) throw Error(ErrorCode::SingularMatrix, "crosstalk matrix is singular");
  if (cond > 1e6) std::clog << "warning: crosstalk matrix condition number " << cond << " exceeds 1e6\n";
  Eigen::FullPivLU<Eigen::MatrixXd> lu(as_matrix(m));
  if (!lu.isInvertible()) throw Error(ErrorCode::SingularMatrix, "crosstalk matrix is singular");
  return transform_spectra(cube, lu.inverse(), true);
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::NonPositiveSigma, "sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * i * i / (sigma * sigma));
    taps[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (double& w : taps) w /= sum;
  return taps;
}

void gaussian_smooth_plane(std::span<const float> in, std::span<float> out, int width, int height, double sigma) {
  const std::vector<double> taps = gaussian_kernel(sigma);
  const int radius = static_cast<int>(taps.size() / 2);
  std::vector<double> tmp(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int xx = std::clamp(x + k, 0, width - 1);
        acc += taps[static_cast<std::size_t>(k + radius)] * in[static_cast<std::size_t>(y) * width + xx];
      }
      tmp[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int yy = std::clamp(y + k, 0, height - 1);
        acc += taps[static_cast<std::size_t>(k + radius)] * tmp[static_cast<std::size_t>(yy) * width + x];
      }
      out[static_cast<std::size_t>(y) * width + x] = static_cast<float>(acc);
    }
  }
}

HyperCube gaussian_smooth(const HyperCube& cube, double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::NonPositiveSigma, "sigma must be positive");
  HyperCube out(cube.bands, cube.width, cube.height, cube.wavelengths_nm);
  for (int b = 0; b < cube.bands; ++b) gaussian_smooth_plane(cube.band(b), out.band(b), cube.width, cube.height, sigma);
  return out;
}

MosaicImage gaussian_smooth(const MosaicImage& image, double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::NonPositiveSigma, "sigma must be positive");
  MosaicImage out = image;
  gaussian_smooth_plane(image.data, out.data, image.width, image.height, sigma);
  return out;
}

}  // namespace hsd
