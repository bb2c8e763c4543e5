#include "hsdemosaic/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include <Eigen/Core>

#include "hsdemosaic/error.hpp"

namespace hsd {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMap = Eigen::Map<const Mat<T>>;
template <typename T>
using MutMap = Eigen::Map<Mat<T>>;

// ---------------------------------------------------------------------------
// BasicTensor

template <typename T>
BasicTensor<T>::BasicTensor(std::vector<int> shape, T fill) : shape_(std::move(shape)) {
  if (shape_.size() > 4) throw Error(ErrorCode::ShapeMismatch, "tensor rank above 4");
  std::size_t n = 1;
  for (int d : shape_) {
    if (d < 0) throw Error(ErrorCode::ShapeMismatch, "negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  data_.assign(n, fill);
}

template <typename T>
void BasicTensor<T>::set_requires_grad(bool on) {
  requires_grad_ = on;
  if (!on) grad_.clear();
}

template <typename T>
std::span<T> BasicTensor<T>::grad() {
  if (grad_.size() != data_.size()) grad_.assign(data_.size(), T(0));
  return grad_;
}

template <typename T>
void BasicTensor<T>::zero_grad() {
  grad_.assign(data_.size(), T(0));
}

template <typename T>
std::string BasicTensor<T>::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
  os << ']';
  return os.str();
}

template <typename T>
void check_finite(const BasicTensor<T>& t, std::string_view context, bool is_gradient) {
  const auto values = t.data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      std::ostringstream os;
      os << context << ": non-finite value " << values[i] << " at flat index " << i << " of tensor "
         << t.shape_string();
      throw Error(is_gradient ? ErrorCode::NonFiniteGradient : ErrorCode::NonFiniteLoss, os.str());
    }
  }
}

// ---------------------------------------------------------------------------
// Layer specs

template <typename T>
BasicConvSpec<T> BasicConvSpec<T>::make(int in, int out, int kernel, int stride, int padding) {
  BasicConvSpec s{in, out, kernel, kernel, stride, padding, BasicTensor<T>({out, in, kernel, kernel}),
                  BasicTensor<T>({out})};
  s.validate();
  return s;
}

template <typename T>
void BasicConvSpec<T>::validate() const {
  if (in_channels < 1 || out_channels < 1 || kernel_h < 1 || kernel_w < 1 || stride < 1 || padding < 0) {
    throw Error(ErrorCode::ShapeMismatch, "invalid convolution geometry");
  }
  if (weight.shape() != std::vector<int>{out_channels, in_channels, kernel_h, kernel_w} ||
      bias.shape() != std::vector<int>{out_channels}) {
    throw Error(ErrorCode::ShapeMismatch, "convolution weight/bias shapes do not match geometry");
  }
}

template <typename T>
BasicDeconvSpec<T> BasicDeconvSpec<T>::make(int in, int out, int kernel, int stride, int padding) {
  BasicDeconvSpec s{in, out, kernel, kernel, stride, padding, BasicTensor<T>({in, out, kernel, kernel}),
                    BasicTensor<T>({out})};
  s.validate();
  return s;
}

template <typename T>
void BasicDeconvSpec<T>::validate() const {
  if (in_channels < 1 || out_channels < 1 || kernel_h < 1 || kernel_w < 1 || stride < 1 || padding < 0) {
    throw Error(ErrorCode::ShapeMismatch, "invalid deconvolution geometry");
  }
  if (weight.shape() != std::vector<int>{in_channels, out_channels, kernel_h, kernel_w} ||
      bias.shape() != std::vector<int>{out_channels}) {
    throw Error(ErrorCode::ShapeMismatch, "deconvolution weight/bias shapes do not match geometry");
  }
}

namespace {

// Geometry of a (forward) convolution from an image of size height x width
// to out_h x out_w. A transposed convolution uses the same geometry with the
// roles of image and output swapped.
struct Window {
  int channels;
  int height;
  int width;
  int kernel_h;
  int kernel_w;
  int stride;
  int padding;
  int out_h;
  int out_w;

  Eigen::Index rows() const { return static_cast<Eigen::Index>(channels) * kernel_h * kernel_w; }
  Eigen::Index cols() const { return static_cast<Eigen::Index>(out_h) * out_w; }
};

template <typename T>
void im2col(const T* image, const Window& w, Mat<T>& cols) {
  cols.resize(w.rows(), w.cols());
  for (int c = 0; c < w.channels; ++c) {
    const T* plane = image + static_cast<std::size_t>(c) * w.height * w.width;
    for (int ki = 0; ki < w.kernel_h; ++ki) {
      for (int kj = 0; kj < w.kernel_w; ++kj) {
        T* row = cols.row((c * w.kernel_h + ki) * w.kernel_w + kj).data();
        for (int oy = 0; oy < w.out_h; ++oy) {
          const int y = oy * w.stride - w.padding + ki;
          T* dst = row + static_cast<std::size_t>(oy) * w.out_w;
          if (y < 0 || y >= w.height) {
            std::fill(dst, dst + w.out_w, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(y) * w.width;
          for (int ox = 0; ox < w.out_w; ++ox) {
            const int x = ox * w.stride - w.padding + kj;
            dst[ox] = (x >= 0 && x < w.width) ? src[x] : T(0);
          }
        }
      }
    }
  }
}

// Scatter-adds columns back into an image (adjoint of im2col).
template <typename T>
void col2im(const Mat<T>& cols, const Window& w, T* image) {
  for (int c = 0; c < w.channels; ++c) {
    T* plane = image + static_cast<std::size_t>(c) * w.height * w.width;
    for (int ki = 0; ki < w.kernel_h; ++ki) {
      for (int kj = 0; kj < w.kernel_w; ++kj) {
        const T* row = cols.row((c * w.kernel_h + ki) * w.kernel_w + kj).data();
        for (int oy = 0; oy < w.out_h; ++oy) {
          const int y = oy * w.stride - w.padding + ki;
          if (y < 0 || y >= w.height) continue;
          T* dst = plane + static_cast<std::size_t>(y) * w.width;
          const T* src = row + static_cast<std::size_t>(oy) * w.out_w;
          for (int ox = 0; ox < w.out_w; ++ox) {
            const int x = ox * w.stride - w.padding + kj;
            if (x >= 0 && x < w.width) dst[x] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
ConstMap<T> view(const T* data, Eigen::Index rows, Eigen::Index cols) {
  return ConstMap<T>(data, rows, cols);
}

template <typename T>
MutMap<T> view(T* data, Eigen::Index rows, Eigen::Index cols) {
  return MutMap<T>(data, rows, cols);
}

template <typename T>
void require_rank4(const BasicTensor<T>& x, int channels, std::string_view what) {
  if (x.rank() != 4 || x.dim(1) != channels) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": expected [N," + std::to_string(channels) +
                                              ",H,W] input, got " + x.shape_string());
  }
}

template <typename Spec>
Window conv_window(const Spec& spec, int height, int width, int out_h, int out_w, int channels) {
  return {channels, height, width, spec.kernel_h, spec.kernel_w, spec.stride, spec.padding, out_h, out_w};
}

}  // namespace

// ---------------------------------------------------------------------------
// Convolution

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& x, const BasicConvSpec<T>& spec) {
  spec.validate();
  require_rank4(x, spec.in_channels, "conv2d");
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  if (h + 2 * spec.padding < spec.kernel_h || w + 2 * spec.padding < spec.kernel_w) {
    throw Error(ErrorCode::ShapeMismatch, "conv2d: kernel larger than padded input");
  }
  const int oh = (h + 2 * spec.padding - spec.kernel_h) / spec.stride + 1;
  const int ow = (w + 2 * spec.padding - spec.kernel_w) / spec.stride + 1;
  const Window win = conv_window(spec, h, w, oh, ow, spec.in_channels);
  const auto weight = view(spec.weight.data().data(), spec.out_channels, win.rows());
  BasicTensor<T> out({n, spec.out_channels, oh, ow});
  Mat<T> cols;
  const std::size_t in_stride = static_cast<std::size_t>(spec.in_channels) * h * w;
  const std::size_t out_stride = static_cast<std::size_t>(spec.out_channels) * oh * ow;
  for (int s = 0; s < n; ++s) {
    im2col(x.data().data() + s * in_stride, win, cols);
    auto dst = view(out.data().data() + s * out_stride, spec.out_channels, win.cols());
    dst.noalias() = weight * cols;
    for (int c = 0; c < spec.out_channels; ++c) dst.row(c).array() += spec.bias[static_cast<std::size_t>(c)];
  }
  return out;
}

template <typename T>
LayerGrads<T> conv2d_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& x, const BasicConvSpec<T>& spec) {
  spec.validate();
  require_rank4(x, spec.in_channels, "conv2d_backward");
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int oh = spec.out_size(h);
  const int ow = (w + 2 * spec.padding - spec.kernel_w) / spec.stride + 1;
  if (grad_out.shape() != std::vector<int>{n, spec.out_channels, oh, ow}) {
    throw Error(ErrorCode::ShapeMismatch, "conv2d_backward: grad_out shape " + grad_out.shape_string());
  }
  const Window win = conv_window(spec, h, w, oh, ow, spec.in_channels);
  const auto weight = view(spec.weight.data().data(), spec.out_channels, win.rows());
  LayerGrads<T> g{BasicTensor<T>(x.shape()), BasicTensor<T>(spec.weight.shape()), BasicTensor<T>(spec.bias.shape())};
  auto grad_w = view(g.grad_w.data().data(), spec.out_channels, win.rows());
  std::vector<double> grad_b(static_cast<std::size_t>(spec.out_channels), 0.0);

  Mat<T> cols;
  Mat<T> grad_cols;
  const std::size_t in_stride = static_cast<std::size_t>(spec.in_channels) * h * w;
  const std::size_t out_stride = static_cast<std::size_t>(spec.out_channels) * oh * ow;
  for (int s = 0; s < n; ++s) {
    const auto go = view(grad_out.data().data() + s * out_stride, spec.out_channels, win.cols());
    im2col(x.data().data() + s * in_stride, win, cols);
    grad_w.noalias() += go * cols.transpose();
    for (int c = 0; c < spec.out_channels; ++c) grad_b[static_cast<std::size_t>(c)] += go.row(c).template cast<double>().sum();
    grad_cols.noalias() = weight.transpose() * go;
    col2im(grad_cols, win, g.grad_x.data().data() + s * in_stride);
  }
  for (int c = 0; c < spec.out_channels; ++c) g.grad_b[static_cast<std::size_t>(c)] = static_cast<T>(grad_b[static_cast<std::size_t>(c)]);
  return g;
}

// ---------------------------------------------------------------------------
// Transposed convolution

template <typename T>
BasicTensor<T> deconv2d_forward(const BasicTensor<T>& x, const BasicDeconvSpec<T>& spec) {
  spec.validate();
  require_rank4(x, spec.in_channels, "deconv2d");
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int oh = spec.out_size(h);
  const int ow = (w - 1) * spec.stride - 2 * spec.padding + spec.kernel_w;
  if (oh <= 0 || ow <= 0) throw Error(ErrorCode::ShapeMismatch, "deconv2d: non-positive output size");
  // Viewed as a convolution from the [out, oh, ow] image down to [in, h, w].
  const Window win = conv_window(spec, oh, ow, h, w, spec.out_channels);
  const auto weight = view(spec.weight.data().data(), spec.in_channels, win.rows());
  BasicTensor<T> out({n, spec.out_channels, oh, ow});
  Mat<T> cols;
  const std::size_t in_stride = static_cast<std::size_t>(spec.in_channels) * h * w;
  const std::size_t plane = static_cast<std::size_t>(oh) * ow;
  const std::size_t out_stride = static_cast<std::size_t>(spec.out_channels) * plane;
  for (int s = 0; s < n; ++s) {
    const auto xs = view(x.data().data() + s * in_stride, spec.in_channels, win.cols());
    cols.noalias() = weight.transpose() * xs;
    T* dst = out.data().data() + s * out_stride;
    for (int c = 0; c < spec.out_channels; ++c) {
      std::fill(dst + c * plane, dst + (c + 1) * plane, spec.bias[static_cast<std::size_t>(c)]);
    }
    col2im(cols, win, dst);
  }
  return out;
}

template <typename T>
LayerGrads<T> deconv2d_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& x,
                                const BasicDeconvSpec<T>& spec) {
  spec.validate();
  require_rank4(x, spec.in_channels, "deconv2d_backward");
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int oh = spec.out_size(h);
  const int ow = (w - 1) * spec.stride - 2 * spec.padding + spec.kernel_w;
  if (grad_out.shape() != std::vector<int>{n, spec.out_channels, oh, ow}) {
    throw Error(ErrorCode::ShapeMismatch, "deconv2d_backward: grad_out shape " + grad_out.shape_string());
  }
  const Window win = conv_window(spec, oh, ow, h, w, spec.out_channels);
  const auto weight = view(spec.weight.data().data(), spec.in_channels, win.rows());
  LayerGrads<T> g{BasicTensor<T>(x.shape()), BasicTensor<T>(spec.weight.shape()), BasicTensor<T>(spec.bias.shape())};
  auto grad_w = view(g.grad_w.data().data(), spec.in_channels, win.rows());
  std::vector<double> grad_b(static_cast<std::size_t>(spec.out_channels), 0.0);

  Mat<T> cols;
  const std::size_t in_stride = static_cast<std::size_t>(spec.in_channels) * h * w;
  const std::size_t plane = static_cast<std::size_t>(oh) * ow;
  const std::size_t out_stride = static_cast<std::size_t>(spec.out_channels) * plane;
  for (int s = 0; s < n; ++s) {
    const T* go = grad_out.data().data() + s * out_stride;
    im2col(go, win, cols);
    const auto xs = view(x.data().data() + s * in_stride, spec.in_channels, win.cols());
    auto gx = view(g.grad_x.data().data() + s * in_stride, spec.in_channels, win.cols());
    gx.noalias() = weight * cols;
    grad_w.noalias() += xs * cols.transpose();
    for (int c = 0; c < spec.out_channels; ++c) {
      double acc = 0.0;
      for (std::size_t p = 0; p < plane; ++p) acc += static_cast<double>(go[c * plane + p]);
      grad_b[static_cast<std::size_t>(c)] += acc;
    }
  }
  for (int c = 0; c < spec.out_channels; ++c) g.grad_b[static_cast<std::size_t>(c)] = static_cast<T>(grad_b[static_cast<std::size_t>(c)]);
  return g;
}

// ---------------------------------------------------------------------------
// Pointwise ops

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& x) {
  if (grad_out.shape() != x.shape()) throw Error(ErrorCode::ShapeMismatch, "relu_backward shapes differ");
  BasicTensor<T> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] > T(0) ? grad_out[i] : T(0);
  return g;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) throw Error(ErrorCode::ShapeMismatch, "add: " + a.shape_string() + " vs " + b.shape_string());
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (b.empty() && (b.rank() == 0 || b.dim(1) == 0)) return a;
  if (a.empty() && (a.rank() == 0 || a.dim(1) == 0)) return b;
  if (a.rank() != 4 || b.rank() != 4 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw Error(ErrorCode::ShapeMismatch, "concat_channels: " + a.shape_string() + " vs " + b.shape_string());
  }
  const int n = a.dim(0);
  const std::size_t sa = a.size() / static_cast<std::size_t>(n);
  const std::size_t sb = b.size() / static_cast<std::size_t>(n);
  BasicTensor<T> out({n, a.dim(1) + b.dim(1), a.dim(2), a.dim(3)});
  for (int s = 0; s < n; ++s) {
    T* dst = out.data().data() + s * (sa + sb);
    std::copy_n(a.data().data() + s * sa, sa, dst);
    std::copy_n(b.data().data() + s * sb, sb, dst + sa);
  }
  return out;
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> split_channels(const BasicTensor<T>& grad, int channels_a) {
  if (grad.rank() != 4 || channels_a < 0 || channels_a > grad.dim(1)) {
    throw Error(ErrorCode::ShapeMismatch, "split_channels: bad split of " + grad.shape_string());
  }
  const int n = grad.dim(0), h = grad.dim(2), w = grad.dim(3);
  const int channels_b = grad.dim(1) - channels_a;
  BasicTensor<T> a({n, channels_a, h, w});
  BasicTensor<T> b({n, channels_b, h, w});
  const std::size_t sa = a.size() / static_cast<std::size_t>(n);
  const std::size_t sb = b.size() / static_cast<std::size_t>(n);
  for (int s = 0; s < n; ++s) {
    const T* src = grad.data().data() + s * (sa + sb);
    std::copy_n(src, sa, a.data().data() + s * sa);
    std::copy_n(src + sa, sb, b.data().data() + s * sb);
  }
  return {std::move(a), std::move(b)};
}

template <typename T>
double mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  if (pred.shape() != target.shape() || pred.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "mse_loss: " + pred.shape_string() + " vs " + target.shape_string());
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

template <typename T>
BasicTensor<T> mse_backward(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  if (pred.shape() != target.shape() || pred.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "mse_backward: " + pred.shape_string() + " vs " + target.shape_string());
  }
  BasicTensor<T> g(pred.shape());
  const double scale = 2.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    g[i] = static_cast<T>(scale * (static_cast<double>(pred[i]) - static_cast<double>(target[i])));
  }
  return g;
}

#define HSD_INSTANTIATE(T)                                                                                   \
  template class BasicTensor<T>;                                                                             \
  template struct BasicConvSpec<T>;                                                                          \
  template struct BasicDeconvSpec<T>;                                                                        \
  template void check_finite(const BasicTensor<T>&, std::string_view, bool);                                 \
  template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const BasicConvSpec<T>&);                    \
  template LayerGrads<T> conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicConvSpec<T>&); \
  template BasicTensor<T> deconv2d_forward(const BasicTensor<T>&, const BasicDeconvSpec<T>&);                \
  template LayerGrads<T> deconv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&,                     \
                                           const BasicDeconvSpec<T>&);                                       \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                                       \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);                       \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                                 \
  template BasicTensor<T> concat_channels(const BasicTensor<T>&, const BasicTensor<T>&);                     \
  template std::pair<BasicTensor<T>, BasicTensor<T>> split_channels(const BasicTensor<T>&, int);             \
  template double mse_loss(const BasicTensor<T>&, const BasicTensor<T>&);                                    \
  template BasicTensor<T> mse_backward(const BasicTensor<T>&, const BasicTensor<T>&);

HSD_INSTANTIATE(float)
HSD_INSTANTIATE(double)

#undef HSD_INSTANTIATE

}  // namespace hsd
