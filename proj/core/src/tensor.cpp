#include "clfp/tensor.hpp"

#include <numeric>

namespace clfp {

Shape::Shape(std::initializer_list<std::size_t> extents) : Shape(std::vector<std::size_t>(extents)) {}

Shape::Shape(std::vector<std::size_t> extents) : extents_(std::move(extents)) {
  for (std::size_t e : extents_) {
    if (e == 0) throw ShapeError("shape extents must be >= 1, got " + str());
  }
}

std::size_t Shape::elements() const noexcept {
  if (extents_.empty()) return 0;
  return std::accumulate(extents_.begin(), extents_.end(), std::size_t{1}, std::multiplies<>());
}

Shape Shape::with(std::size_t axis, std::size_t extent) const {
  std::vector<std::size_t> e = extents_;
  e.at(axis) = extent;
  return Shape(std::move(e));
}

std::string Shape::str() const {
  std::string s = "[";
  for (std::size_t i = 0; i < extents_.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(extents_[i]);
  }
  return s + "]";
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
  }
}

}  // namespace clfp
