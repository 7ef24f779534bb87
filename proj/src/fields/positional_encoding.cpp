// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/fields/positional_encoding.hpp"

#include <cmath>
#include <numbers>

namespace movox::fields {

namespace {

// Writes sin/cos of 2^k·π·x for k = 0..F-1 into the k-th sin and cos slots.
template <typename Real>
void octaves(Real x, std::size_t frequencies, Real* sin_out, Real* cos_out, std::size_t stride) {
  if (frequencies == 0) return;
  Real s = std::sin(std::numbers::pi_v<Real> * x);
  Real c = std::cos(std::numbers::pi_v<Real> * x);
  for (std::size_t k = 0; k < frequencies; ++k) {
    sin_out[2 * k * stride] = s;
    cos_out[2 * k * stride] = c;
    const Real s2 = Real(2) * s * c;
    c = (c - s) * (c + s);
    s = s2;
  }
}

}  // namespace

template <typename Real>
std::vector<Real> positional_encoding(std::span<const Real> v, std::size_t frequencies) {
  const std::size_t m = v.size();
  std::vector<Real> out(encoded_width(m, frequencies));
  for (std::size_t j = 0; j < m; ++j) {
    out[j] = v[j];
    octaves(v[j], frequencies, out.data() + m + j, out.data() + 2 * m + j, m);
  }
  return out;
}

template <typename Real>
diff::Var<Real> encode(diff::Var<Real> x, std::size_t frequencies) {
  const std::size_t rows = x.rows(), m = x.cols(), width = encoded_width(m, frequencies);
  const diff::Buffer<Real>& xv = x.value();
  diff::Buffer<Real> y = diff::Buffer<Real>::matrix(rows, width);
  for (std::size_t r = 0; r < rows; ++r) {
    Real* row = y.data() + r * width;
    for (std::size_t j = 0; j < m; ++j) {
      const Real v = xv[r * m + j];
      row[j] = v;
      octaves(v, frequencies, row + m + j, row + 2 * m + j, m);
    }
  }
  return x.tape->record("encode", std::move(y), {x.id},
                        [xid = x.id, rows, m, width, frequencies](diff::Tape<Real>& t, diff::NodeId self) {
                          const diff::Buffer<Real>& yv = t.value(self);
                          const diff::Buffer<Real>& gy = t.grad(self);
                          diff::Buffer<Real>& gx = t.grad(xid);
                          for (std::size_t r = 0; r < rows; ++r) {
                            const Real* y = yv.data() + r * width;
                            const Real* g = gy.data() + r * width;
                            for (std::size_t j = 0; j < m; ++j) {
                              Real acc = g[j];
                              Real freq = std::numbers::pi_v<Real>;
                              for (std::size_t k = 0; k < frequencies; ++k, freq *= Real(2)) {
                                const std::size_t si = (1 + 2 * k) * m + j, ci = (2 + 2 * k) * m + j;
                                acc += freq * (g[si] * y[ci] - g[ci] * y[si]);
                              }
                              gx[r * m + j] += acc;
                            }
                          }
                        });
}

template std::vector<float> positional_encoding<float>(std::span<const float>, std::size_t);
template std::vector<double> positional_encoding<double>(std::span<const double>, std::size_t);
template diff::Var<float> encode<float>(diff::Var<float>, std::size_t);
template diff::Var<double> encode<double>(diff::Var<double>, std::size_t);

}  // namespace movox::fields
