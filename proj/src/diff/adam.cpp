// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/diff/adam.hpp"

#include <cmath>

namespace movox::diff {

template <typename Real>
void adam_step(ParamStore<Real>& store, const GradientSet<Real>& grads, const AdamConfig& config) {
  if (grads.size() != store.size()) {
    throw ContractError("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                        std::to_string(store.size()) + " parameters");
  }
  const Real b1 = static_cast<Real>(config.beta1);
  const Real b2 = static_cast<Real>(config.beta2);
  for (std::size_t i = 0; i < store.size(); ++i) {
    const ParamId id{i};
    auto& param = store[id];
    const auto& g = grads[id];
    if (g.shape() != param.value.shape()) {
      throw ContractError("adam_step: gradient for '" + param.name + "' has shape " + to_string(g.shape()) +
                          ", parameter has " + to_string(param.value.shape()));
    }
    auto& moments = store.moments(id);
    moments.step += 1;
    const double t = static_cast<double>(moments.step);
    const double correction1 = 1.0 - std::pow(config.beta1, t);
    const double correction2 = 1.0 - std::pow(config.beta2, t);
    // p -= lr·m̂/(√v̂ + ε) with m̂ = m/c1, v̂ = v/c2, rearranged to avoid two divisions per element.
    const Real step = static_cast<Real>(store.learning_rate(param.group) / correction1);
    const Real inv_sqrt_c2 = static_cast<Real>(1.0 / std::sqrt(correction2));
    const Real eps = static_cast<Real>(config.epsilon);

    Real* p = param.value.data();
    Real* m = moments.m.data();
    Real* v = moments.v.data();
    const Real* gd = g.data();
    const std::size_t n = param.value.size();
    for (std::size_t k = 0; k < n; ++k) {
      const Real gk = gd[k];
      m[k] = b1 * m[k] + (Real(1) - b1) * gk;
      v[k] = b2 * v[k] + (Real(1) - b2) * gk * gk;
      p[k] -= step * m[k] / (std::sqrt(v[k]) * inv_sqrt_c2 + eps);
    }
  }
}

template void adam_step<float>(ParamStore<float>&, const GradientSet<float>&, const AdamConfig&);
template void adam_step<double>(ParamStore<double>&, const GradientSet<double>&, const AdamConfig&);

}  // namespace movox::diff
