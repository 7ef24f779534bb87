// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/diff/buffer.hpp"

#include <cmath>

namespace movox::diff {

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

template <typename Real>
void require_finite(std::span<const Real> values, std::string_view what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError(std::string(what) + ": non-finite value at element " + std::to_string(i));
    }
  }
}

template void require_finite<float>(std::span<const float>, std::string_view);
template void require_finite<double>(std::span<const double>, std::string_view);

}  // namespace movox::diff
