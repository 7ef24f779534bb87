// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "movox/diff/param_store.hpp"

namespace movox::diff {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update of every parameter, each at its group's learning rate.
/// Throws ContractError when `grads` is not aligned with `store`.
template <typename Real>
void adam_step(ParamStore<Real>& store, const GradientSet<Real>& grads, const AdamConfig& config = {});

}  // namespace movox::diff
