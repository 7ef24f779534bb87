// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace movox::cli {

inline constexpr double kGradTolerance = 1e-4;
inline constexpr std::size_t kMinProbes = 100;

struct ComponentResult {
  std::string component;
  double max_rel_error = 0.0;
  std::size_t probes = 0;
  std::size_t rejected = 0;
  bool passed() const { return probes >= kMinProbes && max_rel_error < kGradTolerance; }
};

/// Every differentiable op, including position gradients of grid sampling.
std::vector<ComponentResult> gradcheck_ops(std::uint64_t seed);
/// Whole-model training loss of each variant on a 4³ toy model, w.r.t. parameters.
std::vector<ComponentResult> gradcheck_model(std::uint64_t seed);
/// Photometric and regularizer terms and their λ-weighted sum.
std::vector<ComponentResult> gradcheck_loss(std::uint64_t seed);

}  // namespace movox::cli
