// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "movox/error.hpp"

namespace movox::diff {

/// Extents of a dense row-major buffer. An empty extent list is a scalar.
using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape);

/// Dense row-major array of reals. Rank-2 buffers are [rows, cols].
template <typename Real>
class Buffer {
 public:
  using value_type = Real;

  Buffer() : shape_{0} {}

  explicit Buffer(Shape shape, Real fill = Real(0))
      : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

  Buffer(Shape shape, std::vector<Real> values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (element_count(shape_) != values_.size()) {
      throw ShapeError("buffer: shape " + to_string(shape_) + " does not match " +
                       std::to_string(values_.size()) + " values");
    }
  }

  static Buffer scalar(Real v) { return Buffer(Shape{}, std::vector<Real>{v}); }
  static Buffer matrix(std::size_t rows, std::size_t cols, Real fill = Real(0)) {
    return Buffer(Shape{rows, cols}, fill);
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t rank() const noexcept { return shape_.size(); }
  bool is_scalar() const noexcept { return values_.size() == 1; }

  // Rank-2 view helpers; a rank-1 buffer is treated as a single row.
  std::size_t rows() const noexcept { return shape_.size() >= 2 ? shape_[0] : 1; }
  std::size_t cols() const noexcept {
    if (shape_.empty()) return 1;
    return shape_.size() >= 2 ? values_.size() / shape_[0] : shape_[0];
  }

  Real* data() noexcept { return values_.data(); }
  const Real* data() const noexcept { return values_.data(); }
  std::span<Real> span() noexcept { return values_; }
  std::span<const Real> span() const noexcept { return values_; }
  std::vector<Real>& values() noexcept { return values_; }
  const std::vector<Real>& values() const noexcept { return values_; }

  Real& operator[](std::size_t i) noexcept { return values_[i]; }
  Real operator[](std::size_t i) const noexcept { return values_[i]; }
  Real& at(std::size_t r, std::size_t c) noexcept { return values_[r * cols() + c]; }
  Real at(std::size_t r, std::size_t c) const noexcept { return values_[r * cols() + c]; }

  void fill(Real v) { std::fill(values_.begin(), values_.end(), v); }

  /// Same values, converted to another precision.
  template <typename Other>
  Buffer<Other> cast() const {
    return Buffer<Other>(shape_, std::vector<Other>(values_.begin(), values_.end()));
  }

  bool operator==(const Buffer& other) const = default;

 private:
  Shape shape_;
  std::vector<Real> values_;
};

/// Throws NumericError naming `what` if any value is NaN or infinite.
template <typename Real>
void require_finite(std::span<const Real> values, std::string_view what);

}  // namespace movox::diff
