// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/train/loss.hpp"

#include "movox/diff/ops.hpp"

namespace movox::train {

template <typename Real>
diff::Var<Real> photometric_loss(diff::Var<Real> rendered, diff::Var<Real> gt) {
  return diff::l1(diff::sub(rendered, gt));
}

template <typename Real>
diff::Var<Real> offset_regularizer(diff::Var<Real> offsets) {
  return diff::sum(diff::row_norm2(offsets));
}

template diff::Var<float> photometric_loss(diff::Var<float>, diff::Var<float>);
template diff::Var<double> photometric_loss(diff::Var<double>, diff::Var<double>);
template diff::Var<float> offset_regularizer(diff::Var<float>);
template diff::Var<double> offset_regularizer(diff::Var<double>);

}  // namespace movox::train
