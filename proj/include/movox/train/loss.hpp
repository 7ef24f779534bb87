// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "movox/diff/tape.hpp"

namespace movox::train {

/// Σ_r ‖rendered_r − gt_r‖₁ over rows of [R, 3] buffers.
template <typename Real>
diff::Var<Real> photometric_loss(diff::Var<Real> rendered, diff::Var<Real> gt);

/// Σ ‖δx‖₂ over rows of [R·M, 3] offsets (unweighted; the caller applies λ).
template <typename Real>
diff::Var<Real> offset_regularizer(diff::Var<Real> offsets);

}  // namespace movox::train
