#include "hsdemosaic/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "hsdemosaic/error.hpp"
#include "hsdemosaic/io.hpp"

namespace hsd {

namespace {

constexpr char kMagic[8] = {'H', 'S', 'D', 'M', 'C', 'K', 'P', 'T'};
constexpr int kUpsampleKernel = 8;
constexpr int kUpsampleStride = 2;
// (in - 1) * 2 - 2 * 3 + 8 == 2 * in: exact 2x per layer.
constexpr int kUpsamplePadding = 3;

void require_filter_count(int filter_count) {
  if (filter_count != 32 && filter_count != 128) {
    throw Error(ErrorCode::InvalidFilterCount, "filter_count must be 32 or 128, got " + std::to_string(filter_count));
  }
}

}  // namespace

template <typename T>
BasicModelParams<T> BasicModelParams<T>::zeros(int filter_count, MosaicPattern pattern) {
  require_filter_count(filter_count);
  pattern.validate();
  if (pattern.side() != 4) {
    throw Error(ErrorCode::InvalidPattern, "the network upsamples by exactly 4x and needs a 4x4 pattern");
  }
  const int bands = pattern.band_count();
  BasicModelParams p;
  p.pattern = std::move(pattern);
  p.filter_count = filter_count;
  p.m2c_conv = BasicConvSpec<T>::make(1, bands, 4, 4, 0);
  for (auto& block : p.res) {
    block.conv1 = BasicConvSpec<T>::make(bands, bands, 3, 1, 1);
    block.conv2 = BasicConvSpec<T>::make(bands, bands, 3, 1, 1);
  }
  p.deconv1 = BasicDeconvSpec<T>::make(2 * bands, filter_count, kUpsampleKernel, kUpsampleStride, kUpsamplePadding);
  p.deconv2 = BasicDeconvSpec<T>::make(filter_count, bands, kUpsampleKernel, kUpsampleStride, kUpsamplePadding);
  return p;
}

template <typename T>
std::size_t BasicModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for_each_parameter(*this, [&](const std::string&, const BasicTensor<T>& t) { n += t.size(); });
  return n;
}

template <typename T>
BasicTensor<T> forward(const BasicModelParams<T>& params, const BasicTensor<T>& input, ForwardTrace<T>* trace) {
  if (input.rank() != 4 || input.dim(1) != 1) {
    throw Error(ErrorCode::ShapeMismatch, "network input must be [N,1,H,W], got " + input.shape_string());
  }
  const int side = params.pattern.side();
  const int n = input.dim(0), h = input.dim(2), w = input.dim(3);
  if (h % side != 0 || w % side != 0 || h == 0 || w == 0) {
    throw Error(ErrorCode::NonDivisibleInput, "input " + input.shape_string() + " is not a multiple of the pattern");
  }
  ForwardTrace<T> local;
  ForwardTrace<T>& tr = trace ? *trace : local;
  const bool keep = trace != nullptr;

  tr.input = input;
  tr.learned_m2c = conv2d_forward(input, params.m2c_conv);

  const int bands = params.pattern.band_count();
  tr.resampled = BasicTensor<T>({n, bands, h / side, w / side});
  {
    const std::size_t in_stride = static_cast<std::size_t>(h) * w;
    const std::size_t out_stride = tr.resampled.size() / static_cast<std::size_t>(n);
    for (int s = 0; s < n; ++s) {
      m2c_gather<T>(std::span<const T>(input.data().data() + s * in_stride, in_stride), h, w, params.pattern,
                    std::span<T>(tr.resampled.data().data() + s * out_stride, out_stride));
    }
  }

  const BasicTensor<T>* x = &tr.resampled;
  for (std::size_t k = 0; k < params.res.size(); ++k) {
    auto& b = tr.blocks[k];
    b.input = *x;
    b.conv1 = conv2d_forward(b.input, params.res[k].conv1);
    b.act1 = relu(b.conv1);
    b.sum = add(b.input, conv2d_forward(b.act1, params.res[k].conv2));
    b.output = relu(b.sum);
    x = &b.output;
  }

  tr.features = concat_channels(tr.learned_m2c, *x);
  tr.deconv1 = deconv2d_forward(tr.features, params.deconv1);
  tr.act_up = relu(tr.deconv1);
  tr.deconv2 = deconv2d_forward(tr.act_up, params.deconv2);
  tr.output = relu(tr.deconv2);
  check_finite(tr.output, "network forward");
  if (keep) return tr.output;
  return std::move(tr.output);
}

template <typename T>
BasicModelParams<T> backward(const BasicModelParams<T>& params, const ForwardTrace<T>& tr,
                             const BasicTensor<T>& grad_output) {
  if (grad_output.shape() != tr.output.shape()) {
    throw Error(ErrorCode::ShapeMismatch, "grad_output " + grad_output.shape_string() + " vs output " +
                                              tr.output.shape_string());
  }
  BasicModelParams<T> grads = BasicModelParams<T>::zeros(params.filter_count, params.pattern);

  auto g = relu_backward(grad_output, tr.deconv2);
  auto up2 = deconv2d_backward(g, tr.act_up, params.deconv2);
  grads.deconv2.weight = std::move(up2.grad_w);
  grads.deconv2.bias = std::move(up2.grad_b);

  g = relu_backward(up2.grad_x, tr.deconv1);
  auto up1 = deconv2d_backward(g, tr.features, params.deconv1);
  grads.deconv1.weight = std::move(up1.grad_w);
  grads.deconv1.bias = std::move(up1.grad_b);

  auto [g_learned, g_res] = split_channels(up1.grad_x, tr.learned_m2c.dim(1));

  auto m2c = conv2d_backward(g_learned, tr.input, params.m2c_conv);
  grads.m2c_conv.weight = std::move(m2c.grad_w);
  grads.m2c_conv.bias = std::move(m2c.grad_b);

  for (std::size_t k = params.res.size(); k-- > 0;) {
    const auto& b = tr.blocks[k];
    const auto g_sum = relu_backward(g_res, b.sum);
    auto c2 = conv2d_backward(g_sum, b.act1, params.res[k].conv2);
    const auto g_conv1 = relu_backward(c2.grad_x, b.conv1);
    auto c1 = conv2d_backward(g_conv1, b.input, params.res[k].conv1);
    grads.res[k].conv1.weight = std::move(c1.grad_w);
    grads.res[k].conv1.bias = std::move(c1.grad_b);
    grads.res[k].conv2.weight = std::move(c2.grad_w);
    grads.res[k].conv2.bias = std::move(c2.grad_b);
    if (k > 0) g_res = add(c1.grad_x, g_sum);
  }
  return grads;
}

ModelParams init_params(std::uint64_t seed, int filter_count, MosaicPattern pattern) {
  ModelParams p = ModelParams::zeros(filter_count, std::move(pattern));
  std::mt19937_64 rng(seed);
  auto fill = [&](Tensor& weight, int fan_in) {
    const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (float& v : weight.data()) {
      // 53 random bits mapped to [0,1); avoids implementation-defined
      // distribution algorithms so runs replay on any standard library.
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      v = static_cast<float>((2.0 * u - 1.0) * a);
    }
  };
  fill(p.m2c_conv.weight, p.m2c_conv.in_channels * p.m2c_conv.kernel_h * p.m2c_conv.kernel_w);
  for (auto& block : p.res) {
    fill(block.conv1.weight, block.conv1.in_channels * 9);
    fill(block.conv2.weight, block.conv2.in_channels * 9);
  }
  fill(p.deconv1.weight, p.deconv1.in_channels * p.deconv1.kernel_h * p.deconv1.kernel_w);
  fill(p.deconv2.weight, p.deconv2.in_channels * p.deconv2.kernel_h * p.deconv2.kernel_w);
  p.provenance = {{"init_seed", seed}};
  return p;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const std::filesystem::path& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  nlohmann::json tensors = nlohmann::json::array();
  for_each_parameter(params, [&](const std::string& name, const Tensor& t) {
    tensors.push_back({{"name", name}, {"shape", t.shape()}});
  });
  const nlohmann::json meta = {{"filter_count", params.filter_count},
                               {"pattern", io::pattern_to_json(params.pattern)},
                               {"parameter_count", params.parameter_count()},
                               {"tensors", tensors},
                               {"provenance", params.provenance}};
  const std::string meta_text = meta.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(meta_text.size()));
  out.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));
  for_each_parameter(params, [&](const std::string&, const Tensor& t) {
    for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  });
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path, std::optional<int> expected_filter_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": bad magic");
  }
  const std::uint32_t version = get_u32(in, path);
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::VersionMismatch, path.string() + ": checkpoint version " + std::to_string(version) +
                                                ", expected " + std::to_string(kCheckpointVersion));
  }
  const std::uint32_t meta_len = get_u32(in, path);
  std::string meta_text(meta_len, '\0');
  if (!in.read(meta_text.data(), meta_len)) throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": truncated metadata");

  nlohmann::json meta;
  int filter_count = 0;
  MosaicPattern pattern;
  try {
    meta = nlohmann::json::parse(meta_text);
    filter_count = meta.at("filter_count").get<int>();
    pattern = io::pattern_from_json(meta.at("pattern"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": " + e.what());
  }
  if (expected_filter_count && *expected_filter_count != filter_count) {
    throw Error(ErrorCode::ShapeMismatch, path.string() + ": checkpoint has " + std::to_string(filter_count) +
                                              " filters, expected " + std::to_string(*expected_filter_count));
  }
  ModelParams params = ModelParams::zeros(filter_count, pattern);
  params.provenance = meta.value("provenance", nlohmann::json::object());

  const auto& tensors = meta.at("tensors");
  std::size_t index = 0;
  for_each_parameter(params, [&](const std::string& name, Tensor& t) {
    if (index >= tensors.size() || tensors[index].value("name", "") != name ||
        tensors[index].value("shape", std::vector<int>{}) != t.shape()) {
      throw Error(ErrorCode::ShapeMismatch, path.string() + ": tensor table does not match layer " + name);
    }
    ++index;
    for (float& v : t.data()) {
      unsigned char b[4];
      if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": truncated parameters");
      v = std::bit_cast<float>(static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24));
    }
  });
  if (index != tensors.size()) throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": extra tensors listed");
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": trailing bytes after parameters");
  }
  return params;
}

// ---------------------------------------------------------------------------
// Whole-image helpers

Tensor to_tensor(const MosaicImage& mi) {
  Tensor t({1, 1, mi.height, mi.width});
  std::copy(mi.data.begin(), mi.data.end(), t.data().begin());
  return t;
}

Tensor to_tensor(const HyperCube& cube) {
  Tensor t({1, cube.bands, cube.height, cube.width});
  std::copy(cube.data.begin(), cube.data.end(), t.data().begin());
  return t;
}

HyperCube to_cube(const Tensor& t, int sample, const std::vector<double>& wavelengths_nm) {
  if (t.rank() != 4) throw Error(ErrorCode::ShapeMismatch, "expected a [N,C,H,W] tensor");
  HyperCube cube(t.dim(1), t.dim(3), t.dim(2), wavelengths_nm);
  const auto* src = t.data().data() + static_cast<std::size_t>(sample) * cube.data.size();
  std::copy(src, src + cube.data.size(), cube.data.begin());
  return cube;
}

HyperCube predict_cube(const ModelParams& params, const MosaicImage& mi, int tile) {
  const int side = params.pattern.side();
  if (mi.pattern != params.pattern) throw Error(ErrorCode::InvalidPattern, "mosaic pattern differs from the model's");
  if (mi.phase != Phase{}) throw Error(ErrorCode::PhaseMismatch, "mosaic phase must be (0,0)");
  if (mi.width % side != 0 || mi.height % side != 0) {
    throw Error(ErrorCode::NonDivisibleInput, "image is not a multiple of the pattern");
  }
  // Receptive field: 8 residual 3x3 convs plus both deconvs span 11 pattern
  // cells (44 px); 48 keeps tiles exact.
  constexpr int kMargin = 48;
  tile = std::max(side, tile / side * side);
  HyperCube out(params.pattern.band_count(), mi.width, mi.height, params.pattern.wavelengths_nm);
  for (int ty = 0; ty < mi.height; ty += tile) {
    for (int tx = 0; tx < mi.width; tx += tile) {
      const int x0 = std::max(0, tx - kMargin);
      const int y0 = std::max(0, ty - kMargin);
      const int x1 = std::min(mi.width, tx + tile + kMargin);
      const int y1 = std::min(mi.height, ty + tile + kMargin);
      const MosaicImage patch = extract_patch(mi, x0, y0, x1 - x0, y1 - y0);
      const Tensor pred = forward(params, to_tensor(patch));
      const int w = std::min(tile, mi.width - tx);
      const int h = std::min(tile, mi.height - ty);
      for (int b = 0; b < out.bands; ++b) {
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) out.at(b, ty + y, tx + x) = pred.at(0, b, ty - y0 + y, tx - x0 + x);
        }
      }
    }
  }
  return out;
}

template struct BasicModelParams<float>;
template struct BasicModelParams<double>;
template Tensor forward(const ModelParams&, const Tensor&, ForwardTrace<float>*);
template BasicTensor<double> forward(const BasicModelParams<double>&, const BasicTensor<double>&, ForwardTrace<double>*);
template ModelParams backward(const ModelParams&, const ForwardTrace<float>&, const Tensor&);
template BasicModelParams<double> backward(const BasicModelParams<double>&, const ForwardTrace<double>&,
                                           const BasicTensor<double>&);

}  // namespace hsd
