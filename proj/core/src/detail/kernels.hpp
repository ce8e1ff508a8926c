#pragma once

// Private dense kernels shared by ops.cpp and recurrent.cpp. All buffers are
// row-major; the GEMM itself is delegated to Eigen.

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "clfp/errors.hpp"
#include "clfp/ops.hpp"

namespace clfp::detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

enum class Op { none, transpose };

// C[m,n] (+)= op(A) * op(B) where op(A) is [m,k] and op(B) is [k,n].
// A is stored [m,k] (or [k,m] when transposed), B likewise.
template <typename T>
void gemm(Op op_a, Op op_b, std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b,
          T* c, bool accumulate) {
  MapMat<T> cm(c, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  const auto mi = static_cast<Eigen::Index>(m);
  const auto ni = static_cast<Eigen::Index>(n);
  const auto ki = static_cast<Eigen::Index>(k);
  auto run = [&](const auto& lhs, const auto& rhs) {
    if (accumulate) {
      cm.noalias() += lhs * rhs;
    } else {
      cm.noalias() = lhs * rhs;
    }
  };
  if (op_a == Op::none && op_b == Op::none) {
    run(ConstMapMat<T>(a, mi, ki), ConstMapMat<T>(b, ki, ni));
  } else if (op_a == Op::transpose && op_b == Op::none) {
    run(ConstMapMat<T>(a, ki, mi).transpose(), ConstMapMat<T>(b, ki, ni));
  } else if (op_a == Op::none && op_b == Op::transpose) {
    run(ConstMapMat<T>(a, mi, ki), ConstMapMat<T>(b, ni, ki).transpose());
  } else {
    run(ConstMapMat<T>(a, ki, mi).transpose(), ConstMapMat<T>(b, ni, ki).transpose());
  }
}

// Geometry of a stride-1 2-D convolution.
struct ConvGeometry {
  std::size_t in_h, in_w, in_c;
  std::size_t k_h, k_w;
  std::size_t pad_top, pad_left;
  std::size_t out_h, out_w;

  std::size_t patch() const { return k_h * k_w * in_c; }
  std::size_t pixels() const { return out_h * out_w; }
};

inline ConvGeometry make_geometry(std::size_t in_h, std::size_t in_w, std::size_t in_c,
                                  std::size_t k_h, std::size_t k_w, Padding padding) {
  ConvGeometry g{in_h, in_w, in_c, k_h, k_w, 0, 0, 0, 0};
  if (padding == Padding::same) {
    g.pad_top = (k_h - 1) / 2;
    g.pad_left = (k_w - 1) / 2;
    g.out_h = in_h;
    g.out_w = in_w;
  } else {
    if (k_h > in_h || k_w > in_w) {
      throw ShapeError("conv2d: kernel " + std::to_string(k_h) + "x" + std::to_string(k_w) +
                       " larger than input " + std::to_string(in_h) + "x" + std::to_string(in_w));
    }
    g.out_h = in_h - k_h + 1;
    g.out_w = in_w - k_w + 1;
  }
  return g;
}

// Patch matrix [out_h*out_w, k_h*k_w*in_c]; column order (ky, kx, ci) matches
// the [kh, kw, c_in, c_out] kernel layout. Out-of-bounds taps read zero.
template <typename T>
void im2col(const ConvGeometry& g, const T* input, std::vector<T>& cols) {
  const std::size_t patch = g.patch();
  cols.assign(g.pixels() * patch, T{0});
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      T* row = cols.data() + (oy * g.out_w + ox) * patch;
      for (std::size_t ky = 0; ky < g.k_h; ++ky) {
        const auto iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(g.pad_top);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
        for (std::size_t kx = 0; kx < g.k_w; ++kx) {
          const auto ix = static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(g.pad_left);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
          const T* src = input + (static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)) * g.in_c;
          T* dst = row + (ky * g.k_w + kx) * g.in_c;
          for (std::size_t c = 0; c < g.in_c; ++c) dst[c] = src[c];
        }
      }
    }
  }
}

// Scatter-add of a patch-matrix gradient back onto the input grid.
template <typename T>
void col2im(const ConvGeometry& g, const T* cols, T* grad_input) {
  const std::size_t patch = g.patch();
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      const T* row = cols + (oy * g.out_w + ox) * patch;
      for (std::size_t ky = 0; ky < g.k_h; ++ky) {
        const auto iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(g.pad_top);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
        for (std::size_t kx = 0; kx < g.k_w; ++kx) {
          const auto ix = static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(g.pad_left);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
          T* dst = grad_input + (static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)) * g.in_c;
          const T* src = row + (ky * g.k_w + kx) * g.in_c;
          for (std::size_t c = 0; c < g.in_c; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

}  // namespace clfp::detail
