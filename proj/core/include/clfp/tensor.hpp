#pragma once

#include <algorithm>
#include <array>
#include <concepts>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "clfp/errors.hpp"

namespace clfp {

// Ordered list of extents, each >= 1. A rank-0 shape marks the empty tensor.
// Image frames use (timestep, height, width, channel).
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> extents);
  explicit Shape(std::vector<std::size_t> extents);

  std::size_t rank() const noexcept { return extents_.size(); }
  std::size_t operator[](std::size_t axis) const { return extents_.at(axis); }
  std::span<const std::size_t> extents() const noexcept { return extents_; }

  // Product of extents; 0 for the rank-0 (empty) shape.
  std::size_t elements() const noexcept;

  // Same shape with `axis` replaced by `extent`.
  Shape with(std::size_t axis, std::size_t extent) const;

  std::string str() const;

  bool operator==(const Shape&) const = default;

 private:
  std::vector<std::size_t> extents_;
};

// Dense row-major array. float for training, double for gradient checking.
template <std::floating_point T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{0})
      : shape_(std::move(shape)), data_(shape_.elements(), fill) {}

  BasicTensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != shape_.elements()) {
      throw ShapeError("tensor of shape " + shape_.str() + " needs " +
                       std::to_string(shape_.elements()) + " values, got " +
                       std::to_string(data_.size()));
    }
  }

  // Rank-1 tensor from a list of values.
  static BasicTensor vector(std::initializer_list<T> values) {
    return BasicTensor(Shape{values.size()}, std::vector<T>(values));
  }

  // Rank-2 tensor from nested rows.
  static BasicTensor matrix(std::initializer_list<std::initializer_list<T>> rows) {
    const std::size_t m = rows.size();
    const std::size_t n = m == 0 ? 0 : rows.begin()->size();
    std::vector<T> values;
    values.reserve(m * n);
    for (const auto& row : rows) {
      if (row.size() != n) throw ShapeError("ragged matrix literal");
      values.insert(values.end(), row.begin(), row.end());
    }
    return BasicTensor(Shape{m, n}, std::move(values));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.rank(); }
  std::size_t extent(std::size_t axis) const { return shape_[axis]; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  template <std::convertible_to<std::size_t>... Idx>
  T& operator()(Idx... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <std::convertible_to<std::size_t>... Idx>
  const T& operator()(Idx... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  // Same values, new shape with the same element count.
  BasicTensor reshaped(Shape shape) const& {
    BasicTensor out = *this;
    out.reshape(std::move(shape));
    return out;
  }
  BasicTensor reshaped(Shape shape) && {
    reshape(std::move(shape));
    return std::move(*this);
  }
  void reshape(Shape shape) {
    if (shape.elements() != data_.size()) {
      throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
    }
    shape_ = std::move(shape);
  }

  template <std::floating_point U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    if (data_.empty()) return BasicTensor<U>();
    return BasicTensor<U>(shape_, std::move(out));
  }

  bool operator==(const BasicTensor&) const = default;

 private:
  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != shape_.rank()) {
      throw ShapeError("index rank " + std::to_string(idx.size()) + " for tensor " + shape_.str());
    }
    std::size_t off = 0;
    std::size_t axis = 0;
    for (std::size_t i : idx) {
      const std::size_t e = shape_[axis++];
      if (i >= e) throw ShapeError("index out of range for tensor " + shape_.str());
      off = off * e + i;
    }
    return off;
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

template <std::floating_point T>
BasicTensor<T> zeros_like(const BasicTensor<T>& t) {
  return t.empty() ? BasicTensor<T>() : BasicTensor<T>(t.shape());
}

// Throws ShapeError unless a and b have identical shapes.
void require_same_shape(const Shape& a, const Shape& b, const char* what);

template <std::floating_point T>
bool all_finite(const BasicTensor<T>& t) {
  return std::all_of(t.values().begin(), t.values().end(),
                     [](T v) { return v - v == T{0}; });
}

// In-place a += b.
template <std::floating_point T>
void add_inplace(BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  T* pa = a.data();
  const T* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) pa[i] += pb[i];
}

template <std::floating_point T>
void scale_inplace(BasicTensor<T>& a, T factor) {
  for (T& v : a.values()) v *= factor;
}

}  // namespace clfp
