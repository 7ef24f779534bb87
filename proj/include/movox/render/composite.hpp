// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "movox/diff/tape.hpp"

// Emission-absorption compositing over M samples:
//   τ_i = σ_i δt_i,  T_1 = 1,  T_{i+1} = T_i exp(−τ_i),  w_i = T_i − T_{i+1}
//   C = Σ w_i c_i + T_{M+1}·background,  α = 1 − T_{M+1}.
// w_i equals T_i(1 − exp(−τ_i)); the telescoped form keeps Σw_i + T_{M+1} = 1
// to rounding.
namespace movox::render {

template <typename Real>
struct Composite {
  std::array<Real, 3> rgb{};
  Real alpha = 0;
  Real transmittance = 1;  // T_{M+1}
};

/// One ray. `rgb` is M×3 interleaved. Throws ContractError on negative σ or
/// mismatched lengths. `weights`, when non-empty, receives w_1..w_M.
template <typename Real>
Composite<Real> composite(std::span<const Real> sigma, std::span<const Real> rgb, std::span<const Real> deltas,
                          std::array<Real, 3> background, std::span<Real> weights = {});

/// Batched tape op. sigma [R·M, 1], rgb [R·M, 3], deltas [R, M] (data) →
/// [R, 4] holding (r, g, b, α) per ray.
template <typename Real>
diff::Var<Real> composite(diff::Var<Real> sigma, diff::Var<Real> rgb, const diff::Buffer<Real>& deltas,
                          std::array<Real, 3> background);

}  // namespace movox::render
