#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <json.hpp>

#include "hsdemosaic/mosaic.hpp"
#include "hsdemosaic/tensor.hpp"

namespace hsd {

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
struct BasicResBlock {
  BasicConvSpec<T> conv1;
  BasicConvSpec<T> conv2;
};

/// Weights of the parallel demosaicing network:
///
///   path A: learned mosaic-to-cube conv (1 -> 16, 4x4, stride 4)
///   path B: hand-crafted mosaic-to-cube resampling -> 4 residual blocks
///   concat(A, B) -> deconv1 (32 -> filter_count) -> ReLU
///                -> deconv2 (filter_count -> 16) -> ReLU
template <typename T>
struct BasicModelParams {
  MosaicPattern pattern = MosaicPattern::standard();
  int filter_count = 128;
  BasicConvSpec<T> m2c_conv;
  std::array<BasicResBlock<T>, 4> res;
  BasicDeconvSpec<T> deconv1;
  BasicDeconvSpec<T> deconv2;
  /// Free-form training provenance stored in checkpoints.
  nlohmann::json provenance = nlohmann::json::object();

  /// Zero-initialized parameters with the fixed layer geometry.
  static BasicModelParams zeros(int filter_count, MosaicPattern pattern = MosaicPattern::standard());

  std::size_t parameter_count() const;

  template <typename U>
  BasicModelParams<U> cast() const;
};

using ModelParams = BasicModelParams<float>;

/// Visits every weight and bias tensor in declaration order.
template <typename T, typename Fn>
void for_each_parameter(BasicModelParams<T>& p, Fn&& fn);
template <typename T, typename Fn>
void for_each_parameter(const BasicModelParams<T>& p, Fn&& fn);

/// Intermediate activations retained for the backward pass. Names follow
/// the pre-activation / post-activation pairs of each layer.
template <typename T>
struct ForwardTrace {
  BasicTensor<T> input;
  BasicTensor<T> learned_m2c;  // path A, [N,16,H/4,W/4]
  BasicTensor<T> resampled;    // path B input, [N,16,H/4,W/4]
  struct Block {
    BasicTensor<T> input;
    BasicTensor<T> conv1;
    BasicTensor<T> act1;
    BasicTensor<T> sum;
    BasicTensor<T> output;
  };
  std::array<Block, 4> blocks;
  BasicTensor<T> features;  // concat, [N,32,H/4,W/4]
  BasicTensor<T> deconv1;
  BasicTensor<T> act_up;    // [N,filter_count,H/2,W/2]
  BasicTensor<T> deconv2;
  BasicTensor<T> output;    // [N,16,H,W]
};

/// Runs the network on a batch of mosaic patches [N,1,H,W]; H and W must be
/// multiples of the pattern side.
template <typename T>
BasicTensor<T> forward(const BasicModelParams<T>& params, const BasicTensor<T>& input,
                       ForwardTrace<T>* trace = nullptr);

/// Gradients of a scalar loss w.r.t. every parameter, given d loss / d output.
template <typename T>
BasicModelParams<T> backward(const BasicModelParams<T>& params, const ForwardTrace<T>& trace,
                             const BasicTensor<T>& grad_output);

/// Uniform(-a, a) weights with a = 1/sqrt(fan_in), zero biases. Only 32 and
/// 128 filters are accepted.
ModelParams init_params(std::uint64_t seed, int filter_count, MosaicPattern pattern = MosaicPattern::standard());

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
/// Throws CorruptCheckpoint, VersionMismatch, or ShapeMismatch when
/// `expected_filter_count` is given and differs.
ModelParams load_checkpoint(const std::filesystem::path& path, std::optional<int> expected_filter_count = std::nullopt);

/// Full-image inference; the image is processed in overlapping tiles whose
/// margins cover the receptive field.
HyperCube predict_cube(const ModelParams& params, const MosaicImage& mi, int tile = 256);

/// Packs a mosaic into a [1,1,H,W] tensor and a cube into [1,L,H,W].
Tensor to_tensor(const MosaicImage& mi);
Tensor to_tensor(const HyperCube& cube);
HyperCube to_cube(const Tensor& t, int sample, const std::vector<double>& wavelengths_nm);

// ---------------------------------------------------------------------------

template <typename T, typename Fn>
void for_each_parameter(BasicModelParams<T>& p, Fn&& fn) {
  fn("m2c_conv.weight", p.m2c_conv.weight);
  fn("m2c_conv.bias", p.m2c_conv.bias);
  for (std::size_t k = 0; k < p.res.size(); ++k) {
    const std::string prefix = "res" + std::to_string(k);
    fn(prefix + ".conv1.weight", p.res[k].conv1.weight);
    fn(prefix + ".conv1.bias", p.res[k].conv1.bias);
    fn(prefix + ".conv2.weight", p.res[k].conv2.weight);
    fn(prefix + ".conv2.bias", p.res[k].conv2.bias);
  }
  fn("deconv1.weight", p.deconv1.weight);
  fn("deconv1.bias", p.deconv1.bias);
  fn("deconv2.weight", p.deconv2.weight);
  fn("deconv2.bias", p.deconv2.bias);
}

template <typename T, typename Fn>
void for_each_parameter(const BasicModelParams<T>& p, Fn&& fn) {
  for_each_parameter(const_cast<BasicModelParams<T>&>(p),
                     [&](const std::string& name, BasicTensor<T>& t) { fn(name, static_cast<const BasicTensor<T>&>(t)); });
}

template <typename T>
template <typename U>
BasicModelParams<U> BasicModelParams<T>::cast() const {
  BasicModelParams<U> out;
  out.pattern = pattern;
  out.filter_count = filter_count;
  out.m2c_conv = m2c_conv.template cast<U>();
  for (std::size_t k = 0; k < res.size(); ++k) {
    out.res[k].conv1 = res[k].conv1.template cast<U>();
    out.res[k].conv2 = res[k].conv2.template cast<U>();
  }
  out.deconv1 = deconv1.template cast<U>();
  out.deconv2 = deconv2.template cast<U>();
  out.provenance = provenance;
  return out;
}

}  // namespace hsd
