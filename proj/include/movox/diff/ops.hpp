// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "movox/diff/tape.hpp"

// Batched differentiable ops. Inputs are rank-2 [rows, cols] unless noted.
// Every op checks shapes (ShapeError naming the op) and finiteness of its
// result (NumericError).
namespace movox::diff {

/// y = x·wᵀ + b with x [B, in], w [out, in], b [out].
template <typename Real>
Var<Real> linear(Var<Real> x, Var<Real> w, Var<Real> b);
/// y = x·wᵀ.
template <typename Real>
Var<Real> linear(Var<Real> x, Var<Real> w);

/// max(x, 0); the derivative at 0 is 0.
template <typename Real>
Var<Real> relu(Var<Real> x);
template <typename Real>
Var<Real> sigmoid(Var<Real> x);
/// log(1 + exp(x + shift)).
template <typename Real>
Var<Real> softplus(Var<Real> x, Real shift = Real(0));
template <typename Real>
Var<Real> sin(Var<Real> x);
template <typename Real>
Var<Real> cos(Var<Real> x);

template <typename Real>
Var<Real> scale(Var<Real> x, Real factor);
template <typename Real>
Var<Real> add(Var<Real> a, Var<Real> b);
template <typename Real>
Var<Real> sub(Var<Real> a, Var<Real> b);
template <typename Real>
Var<Real> mul(Var<Real> a, Var<Real> b);

/// Column-wise concatenation of buffers with equal row counts.
template <typename Real>
Var<Real> concat(std::span<const Var<Real>> parts);
template <typename Real>
Var<Real> concat(std::initializer_list<Var<Real>> parts) {
  return concat(std::span<const Var<Real>>(parts.begin(), parts.size()));
}
/// Columns [begin, begin + count).
template <typename Real>
Var<Real> slice_cols(Var<Real> x, std::size_t begin, std::size_t count);
/// Row r of the input becomes rows [r·times, (r+1)·times) of the output.
template <typename Real>
Var<Real> repeat_rows(Var<Real> x, std::size_t times);

/// Scalar Σx.
template <typename Real>
Var<Real> sum(Var<Real> x);
/// Scalar Σ|x|; d|x|/dx at 0 is 0.
template <typename Real>
Var<Real> l1(Var<Real> x);
/// Scalar Euclidean norm of all elements; gradient at the origin is 0.
template <typename Real>
Var<Real> norm2(Var<Real> x);
/// Per-row Euclidean norm, [B, D] -> [B, 1]; gradient of a zero row is 0.
template <typename Real>
Var<Real> row_norm2(Var<Real> x);

}  // namespace movox::diff
