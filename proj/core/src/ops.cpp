#include "clfp/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "detail/kernels.hpp"

namespace clfp {

namespace {

void require_rank(const Shape& s, std::size_t rank, const char* what) {
  if (s.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     s.str());
  }
}

}  // namespace

template <std::floating_point T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank(a.shape(), 2, "matmul lhs");
  require_rank(b.shape(), 2, "matmul rhs");
  if (a.extent(1) != b.extent(0)) {
    throw ShapeError("matmul: inner extents differ, " + a.shape().str() + " x " + b.shape().str());
  }
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  BasicTensor<T> c(Shape{m, n});
  detail::gemm(detail::Op::none, detail::Op::none, m, n, k, a.data(), b.data(), c.data(), false);
  return c;
}

template <std::floating_point T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                      const BasicTensor<T>& bias, Padding padding) {
  require_rank(input.shape(), 3, "conv2d input");
  require_rank(kernels.shape(), 4, "conv2d kernels");
  require_rank(bias.shape(), 1, "conv2d bias");
  if (kernels.extent(2) != input.extent(2)) {
    throw ShapeError("conv2d: kernel input channels " + kernels.shape().str() +
                     " do not match input " + input.shape().str());
  }
  const std::size_t c_out = kernels.extent(3);
  if (bias.extent(0) != c_out) {
    throw ShapeError("conv2d: bias " + bias.shape().str() + " does not match kernels " +
                     kernels.shape().str());
  }
  const auto g = detail::make_geometry(input.extent(0), input.extent(1), input.extent(2),
                                       kernels.extent(0), kernels.extent(1), padding);
  std::vector<T> cols;
  detail::im2col(g, input.data(), cols);
  BasicTensor<T> out(Shape{g.out_h, g.out_w, c_out});
  T* o = out.data();
  for (std::size_t p = 0; p < g.pixels(); ++p) {
    std::copy(bias.data(), bias.data() + c_out, o + p * c_out);
  }
  detail::gemm(detail::Op::none, detail::Op::none, g.pixels(), c_out, g.patch(), cols.data(),
               kernels.data(), o, true);
  return out;
}

template <std::floating_point T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                               const BasicTensor<T>& grad_output, Padding padding) {
  require_rank(input.shape(), 3, "conv2d_backward input");
  require_rank(kernels.shape(), 4, "conv2d_backward kernels");
  const auto g = detail::make_geometry(input.extent(0), input.extent(1), input.extent(2),
                                       kernels.extent(0), kernels.extent(1), padding);
  const std::size_t c_out = kernels.extent(3);
  require_same_shape(grad_output.shape(), Shape{g.out_h, g.out_w, c_out}, "conv2d_backward");

  std::vector<T> cols;
  detail::im2col(g, input.data(), cols);

  Conv2dGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(kernels.shape()),
                       BasicTensor<T>(Shape{c_out})};
  detail::gemm(detail::Op::transpose, detail::Op::none, g.patch(), c_out, g.pixels(), cols.data(),
               grad_output.data(), grads.kernels.data(), false);
  const T* go = grad_output.data();
  for (std::size_t p = 0; p < g.pixels(); ++p) {
    for (std::size_t c = 0; c < c_out; ++c) grads.bias[c] += go[p * c_out + c];
  }
  std::vector<T> grad_cols(g.pixels() * g.patch());
  detail::gemm(detail::Op::none, detail::Op::transpose, g.pixels(), g.patch(), c_out, go,
               kernels.data(), grad_cols.data(), false);
  detail::col2im(g, grad_cols.data(), grads.input.data());
  return grads;
}

template <std::floating_point T>
Pooled<T> maxpool2d(const BasicTensor<T>& input, std::size_t window_h, std::size_t window_w) {
  require_rank(input.shape(), 3, "maxpool2d input");
  const std::size_t h = input.extent(0), w = input.extent(1), c = input.extent(2);
  if (window_h == 0 || window_w == 0 || h % window_h != 0 || w % window_w != 0) {
    throw ShapeError("maxpool2d: window " + std::to_string(window_h) + "x" +
                     std::to_string(window_w) + " does not divide input " + input.shape().str());
  }
  const std::size_t oh = h / window_h, ow = w / window_w;
  Pooled<T> out{BasicTensor<T>(Shape{oh, ow, c}), std::vector<std::size_t>(oh * ow * c),
                input.shape()};
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::size_t best = ((oy * window_h) * w + ox * window_w) * c + ch;
        for (std::size_t dy = 0; dy < window_h; ++dy) {
          for (std::size_t dx = 0; dx < window_w; ++dx) {
            const std::size_t idx = ((oy * window_h + dy) * w + ox * window_w + dx) * c + ch;
            if (input[idx] > input[best]) best = idx;
          }
        }
        const std::size_t o = (oy * ow + ox) * c + ch;
        out.output[o] = input[best];
        out.argmax[o] = best;
      }
    }
  }
  return out;
}

template <std::floating_point T>
BasicTensor<T> maxpool2d_backward(const Pooled<T>& pooled, const BasicTensor<T>& grad_output) {
  require_same_shape(grad_output.shape(), pooled.output.shape(), "maxpool2d_backward");
  BasicTensor<T> grad(pooled.input_shape);
  for (std::size_t o = 0; o < grad_output.size(); ++o) grad[pooled.argmax[o]] += grad_output[o];
  return grad;
}

template <std::floating_point T>
BasicTensor<T> activate(Activation kind, const BasicTensor<T>& x) {
  BasicTensor<T> y = x;
  switch (kind) {
    case Activation::sigmoid:
      for (T& v : y.values()) v = sigmoid(v);
      break;
    case Activation::tanh:
      for (T& v : y.values()) v = std::tanh(v);
      break;
    case Activation::relu:
      for (T& v : y.values()) v = v > T{0} ? v : T{0};
      break;
    case Activation::softmax: {
      if (x.rank() != 1 && x.rank() != 2) {
        throw ShapeError("softmax: expected rank 1 or 2, got " + x.shape().str());
      }
      const std::size_t n = x.extent(x.rank() - 1);
      const std::size_t rows = x.size() / n;
      for (std::size_t r = 0; r < rows; ++r) {
        T* row = y.data() + r * n;
        const T peak = *std::max_element(row, row + n);
        T total{0};
        for (std::size_t j = 0; j < n; ++j) {
          row[j] = std::exp(row[j] - peak);
          total += row[j];
        }
        for (std::size_t j = 0; j < n; ++j) row[j] /= total;
      }
      break;
    }
  }
  return y;
}

template <std::floating_point T>
BasicTensor<T> derivative(Activation kind, const BasicTensor<T>& x) {
  BasicTensor<T> d = x;
  switch (kind) {
    case Activation::sigmoid:
      for (T& v : d.values()) {
        const T s = sigmoid(v);
        v = s * (T{1} - s);
      }
      break;
    case Activation::tanh:
      for (T& v : d.values()) {
        const T t = std::tanh(v);
        v = T{1} - t * t;
      }
      break;
    case Activation::relu:
      for (T& v : d.values()) v = v > T{0} ? T{1} : T{0};
      break;
    case Activation::softmax:
      throw ShapeError("softmax has no elementwise derivative; use activation_backward");
  }
  return d;
}

template <std::floating_point T>
BasicTensor<T> activation_backward(Activation kind, const BasicTensor<T>& x,
                                   const BasicTensor<T>& grad_output) {
  require_same_shape(x.shape(), grad_output.shape(), "activation_backward");
  if (kind != Activation::softmax) {
    BasicTensor<T> d = derivative(kind, x);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= grad_output[i];
    return d;
  }
  // dx_j = y_j * (g_j - sum_k g_k y_k), row by row.
  const BasicTensor<T> y = activate(kind, x);
  BasicTensor<T> dx(x.shape());
  const std::size_t n = x.extent(x.rank() - 1);
  for (std::size_t r = 0; r < x.size() / n; ++r) {
    T dot{0};
    for (std::size_t j = 0; j < n; ++j) dot += grad_output[r * n + j] * y[r * n + j];
    for (std::size_t j = 0; j < n; ++j) dx[r * n + j] = y[r * n + j] * (grad_output[r * n + j] - dot);
  }
  return dx;
}

template <std::floating_point T>
BasicTensor<T> concat(const BasicTensor<T>& a, const BasicTensor<T>& b, std::size_t axis) {
  if (b.empty()) return a;
  if (a.empty()) return b;
  if (a.rank() != b.rank() || axis >= a.rank()) {
    throw ShapeError("concat: incompatible shapes " + a.shape().str() + " and " + b.shape().str() +
                     " on axis " + std::to_string(axis));
  }
  for (std::size_t i = 0; i < a.rank(); ++i) {
    if (i != axis && a.extent(i) != b.extent(i)) {
      throw ShapeError("concat: incompatible shapes " + a.shape().str() + " and " +
                       b.shape().str() + " on axis " + std::to_string(axis));
    }
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= a.extent(i);
  for (std::size_t i = axis + 1; i < a.rank(); ++i) inner *= a.extent(i);
  const std::size_t sa = a.extent(axis) * inner, sb = b.extent(axis) * inner;
  BasicTensor<T> out(a.shape().with(axis, a.extent(axis) + b.extent(axis)));
  T* o = out.data();
  for (std::size_t r = 0; r < outer; ++r) {
    o = std::copy(a.data() + r * sa, a.data() + (r + 1) * sa, o);
    o = std::copy(b.data() + r * sb, b.data() + (r + 1) * sb, o);
  }
  return out;
}

template <std::floating_point T>
std::pair<BasicTensor<T>, BasicTensor<T>> split(const BasicTensor<T>& t, std::size_t axis,
                                                std::size_t boundary) {
  if (axis >= t.rank() || boundary > t.extent(axis)) {
    throw ShapeError("split: boundary " + std::to_string(boundary) + " on axis " +
                     std::to_string(axis) + " out of range for " + t.shape().str());
  }
  const std::size_t total = t.extent(axis);
  if (boundary == 0) return {BasicTensor<T>(), t};
  if (boundary == total) return {t, BasicTensor<T>()};
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= t.extent(i);
  for (std::size_t i = axis + 1; i < t.rank(); ++i) inner *= t.extent(i);
  BasicTensor<T> first(t.shape().with(axis, boundary));
  BasicTensor<T> second(t.shape().with(axis, total - boundary));
  const std::size_t sa = boundary * inner, sb = (total - boundary) * inner;
  const T* src = t.data();
  for (std::size_t r = 0; r < outer; ++r) {
    std::copy(src, src + sa, first.data() + r * sa);
    src += sa;
    std::copy(src, src + sb, second.data() + r * sb);
    src += sb;
  }
  return {std::move(first), std::move(second)};
}

#define CLFP_INSTANTIATE_OPS(T)                                                                  \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                  \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&,                   \
                                 const BasicTensor<T>&, Padding);                                \
  template Conv2dGrads<T> conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&,          \
                                          const BasicTensor<T>&, Padding);                       \
  template Pooled<T> maxpool2d(const BasicTensor<T>&, std::size_t, std::size_t);                 \
  template BasicTensor<T> maxpool2d_backward(const Pooled<T>&, const BasicTensor<T>&);           \
  template BasicTensor<T> activate(Activation, const BasicTensor<T>&);                           \
  template BasicTensor<T> derivative(Activation, const BasicTensor<T>&);                         \
  template BasicTensor<T> activation_backward(Activation, const BasicTensor<T>&,                 \
                                              const BasicTensor<T>&);                            \
  template BasicTensor<T> concat(const BasicTensor<T>&, const BasicTensor<T>&, std::size_t);     \
  template std::pair<BasicTensor<T>, BasicTensor<T>> split(const BasicTensor<T>&, std::size_t,   \
                                                           std::size_t);

CLFP_INSTANTIATE_OPS(float)
CLFP_INSTANTIATE_OPS(double)

}  // namespace clfp
