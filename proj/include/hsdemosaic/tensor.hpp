#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hsd {

/// Dense N-d array (up to rank 4, [N, C, H, W]) with an optional gradient
/// slot. Storage is float for the production network; the same engine is
/// instantiated for double so gradient checks are not swamped by rounding.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(std::vector<int> shape, T fill = T(0));

  const std::vector<int>& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& values() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(int n, int c, int h, int w) { return data_[offset(n, c, h, w)]; }
  const T& at(int n, int c, int h, int w) const { return data_[offset(n, c, h, w)]; }

  bool requires_grad() const noexcept { return requires_grad_; }
  void set_requires_grad(bool on);
  bool has_grad() const noexcept { return !grad_.empty(); }
  /// Gradient slot; allocated (zeroed) on first access.
  std::span<T> grad();
  std::span<const T> grad() const noexcept { return grad_; }
  void zero_grad();

  template <typename U>
  BasicTensor<U> cast() const {
    BasicTensor<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  std::string shape_string() const;

 private:
  std::size_t offset(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
  }

  std::vector<int> shape_;
  std::vector<T> data_;
  std::vector<T> grad_;
  bool requires_grad_ = false;
};

using Tensor = BasicTensor<float>;

/// Throws when any value is NaN or infinite. `context` names the failing
/// stage in the error message.
template <typename T>
void check_finite(const BasicTensor<T>& t, std::string_view context, bool is_gradient = false);

/// 2D cross-correlation layer. Weights are [out, in, kh, kw], bias [out].
template <typename T>
struct BasicConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int padding = 0;
  BasicTensor<T> weight;
  BasicTensor<T> bias;

  static BasicConvSpec make(int in, int out, int kernel, int stride, int padding);
  void validate() const;
  int out_size(int in) const { return (in + 2 * padding - kernel_h) / stride + 1; }

  template <typename U>
  BasicConvSpec<U> cast() const {
    return {in_channels, out_channels, kernel_h, kernel_w, stride, padding, weight.template cast<U>(),
            bias.template cast<U>()};
  }
};

/// Transposed convolution. Weights are [in, out, kh, kw] so that a deconv
/// sharing a conv's weight tensor is that conv's adjoint.
template <typename T>
struct BasicDeconvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int padding = 0;
  BasicTensor<T> weight;
  BasicTensor<T> bias;

  static BasicDeconvSpec make(int in, int out, int kernel, int stride, int padding);
  void validate() const;
  int out_size(int in) const { return (in - 1) * stride - 2 * padding + kernel_h; }

  template <typename U>
  BasicDeconvSpec<U> cast() const {
    return {in_channels, out_channels, kernel_h, kernel_w, stride, padding, weight.template cast<U>(),
            bias.template cast<U>()};
  }
};

using ConvSpec = BasicConvSpec<float>;
using DeconvSpec = BasicDeconvSpec<float>;

template <typename T>
struct LayerGrads {
  BasicTensor<T> grad_x;
  BasicTensor<T> grad_w;
  BasicTensor<T> grad_b;
};

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& x, const BasicConvSpec<T>& spec);
template <typename T>
LayerGrads<T> conv2d_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& x, const BasicConvSpec<T>& spec);

template <typename T>
BasicTensor<T> deconv2d_forward(const BasicTensor<T>& x, const BasicDeconvSpec<T>& spec);
template <typename T>
LayerGrads<T> deconv2d_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& x,
                                const BasicDeconvSpec<T>& spec);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);
/// Passes gradient where x > 0; the subgradient at 0 is 0.
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Concatenates along axis 1. An empty tensor acts as the neutral element.
template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b);
/// Splits a gradient of concat_channels back into its two inputs' shares.
template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> split_channels(const BasicTensor<T>& grad, int channels_a);

template <typename T>
double mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target);
/// d mse / d pred = 2 (pred - target) / N.
template <typename T>
BasicTensor<T> mse_backward(const BasicTensor<T>& pred, const BasicTensor<T>& target);

}  // namespace hsd
