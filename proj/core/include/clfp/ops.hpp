#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "clfp/tensor.hpp"

namespace clfp {

enum class Padding { valid, same };

enum class Activation { sigmoid, tanh, relu, softmax };

// c[i][j] = sum_p a[i][p] * b[p][j] for a:[m,k], b:[k,n].
template <std::floating_point T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

// Stride-1 cross-correlation (no kernel flip) plus per-channel bias.
//   input   [h, w, c_in]
//   kernels [kh, kw, c_in, c_out]
//   bias    [c_out]
// `same` pads (k-1)/2 before and the remainder after, so even kernels get the
// extra row/column on the bottom/right.
template <std::floating_point T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                      const BasicTensor<T>& bias, Padding padding);

template <std::floating_point T>
struct Conv2dGrads {
  BasicTensor<T> input;
  BasicTensor<T> kernels;
  BasicTensor<T> bias;
};

template <std::floating_point T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                               const BasicTensor<T>& grad_output, Padding padding);

// Non-overlapping max pooling over [h, w, c]. `argmax` holds, for every
// output element, the flat input index that won (first in row-major order on
// ties) so the backward pass can route gradients.
template <std::floating_point T>
struct Pooled {
  BasicTensor<T> output;
  std::vector<std::size_t> argmax;
  Shape input_shape;
};

template <std::floating_point T>
Pooled<T> maxpool2d(const BasicTensor<T>& input, std::size_t window_h, std::size_t window_w);

template <std::floating_point T>
BasicTensor<T> maxpool2d_backward(const Pooled<T>& pooled, const BasicTensor<T>& grad_output);

// Elementwise sigmoid/tanh/relu; softmax along the last axis of a rank-1 or
// rank-2 tensor with max-subtraction.
template <std::floating_point T>
BasicTensor<T> activate(Activation kind, const BasicTensor<T>& x);

// f'(x) elementwise. Only for sigmoid, tanh and relu (relu'(0) = 0); softmax
// has no elementwise derivative, use activation_backward.
template <std::floating_point T>
BasicTensor<T> derivative(Activation kind, const BasicTensor<T>& x);

// Vector-Jacobian product: dL/dx given x and dL/dy for y = activate(kind, x).
template <std::floating_point T>
BasicTensor<T> activation_backward(Activation kind, const BasicTensor<T>& x,
                                   const BasicTensor<T>& grad_output);

// b's slices follow a's along `axis`. An empty operand is the identity.
template <std::floating_point T>
BasicTensor<T> concat(const BasicTensor<T>& a, const BasicTensor<T>& b, std::size_t axis);

// Inverse of concat: first `boundary` slices along `axis`, then the rest.
template <std::floating_point T>
std::pair<BasicTensor<T>, BasicTensor<T>> split(const BasicTensor<T>& t, std::size_t axis,
                                                std::size_t boundary);

// Overflow-free logistic function.
template <std::floating_point T>
inline T sigmoid(T x) noexcept {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

}  // namespace clfp
