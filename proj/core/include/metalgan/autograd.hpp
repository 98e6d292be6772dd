#pragma once

// Minimal reverse-mode differentiation over NCHW tensors. Graphs are built
// eagerly by the op functions below and released when the last Var handle to
// the root goes away. Instantiated for float (training) and double (gradient
// checks).

#include <functional>
#include <memory>
#include <vector>

#include "metalgan/tensor.hpp"

namespace metalgan::ag {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  Tensor<T>& ensure_grad() {
    if (grad.shape() != value.shape() || grad.size() != value.size()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

  bool defined() const { return node_ != nullptr; }
  const Tensor<T>& value() const { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const Shape& shape() const { return node_->value.shape(); }
  int dim(std::size_t i) const { return node_->value.dim(i); }
  const std::shared_ptr<Node<T>>& node() const { return node_; }

  /// Scalar value of a rank-0 result.
  T item() const { return node_->value[0]; }

 private:
  std::shared_ptr<Node<T>> node_;
};

template <typename T>
Var<T> constant(Tensor<T> value);

/// Leaf whose gradient is accumulated by backward().
template <typename T>
Var<T> parameter(Tensor<T> value);

template <typename T>
Var<T> detach(const Var<T>& v);

/// Creates an op result. The result requires grad iff any input does; the
/// backward callback is dropped otherwise.
template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> inputs, std::function<void(Node<T>&)> backward);

/// Runs reverse accumulation from a rank-0 root with seed 1.
template <typename T>
void backward(const Var<T>& root);

// Convolution with zero padding. Weight layout (out, in, k, k). Pass an
// undefined Var for no bias.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad);

// Transposed convolution, the adjoint of conv2d. Weight layout (in, out, k, k).
template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad);

// Per-sample, per-channel normalization over the spatial extent, followed by
// a per-channel affine transform.
template <typename T>
Var<T> instance_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5));

template <typename T>
Var<T> relu(const Var<T>& x);

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope);

template <typename T>
Var<T> tanh(const Var<T>& x);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b);

/// Mean over spatial positions: (N,C,H,W) -> (N,C).
template <typename T>
Var<T> global_avg_pool(const Var<T>& x);

/// Mean absolute difference over all elements, rank-0 result.
template <typename T>
Var<T> l1_mean(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> scale(const Var<T>& a, T factor);

/// Sum of rank-0 values.
template <typename T>
Var<T> sum_scalars(const std::vector<Var<T>>& terms);

}  // namespace metalgan::ag
