// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "movox/diff/tape.hpp"

namespace movox::fields {

/// Width of γ(v) for an m-vector at F frequencies.
constexpr std::size_t encoded_width(std::size_t m, std::size_t frequencies) { return m * (1 + 2 * frequencies); }

/// γ(v) = [v, sin(2⁰πv), cos(2⁰πv), …, sin(2^{F−1}πv), cos(2^{F−1}πv)], each block m wide.
template <typename Real>
std::vector<Real> positional_encoding(std::span<const Real> v, std::size_t frequencies);

/// Row-wise γ on the tape: [B, m] -> [B, m·(1+2F)]. Higher octaves come from
/// double-angle recurrences on the first one, so each element costs one sin/cos.
template <typename Real>
diff::Var<Real> encode(diff::Var<Real> x, std::size_t frequencies);

}  // namespace movox::fields
