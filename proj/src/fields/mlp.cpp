// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/fields/mlp.hpp"

#include <cmath>

#include "movox/diff/ops.hpp"

namespace movox::fields {

template <typename Real>
diff::ParamId ParamDeclarer<Real>::declare(const std::string& name, diff::ParamGroup group, diff::Shape shape,
                                           Init init) {
  if (!rng_) {
    const diff::ParamId id = store_->require(name);
    const auto& p = (*store_)[id];
    if (p.value.shape() != shape) {
      throw ContractError("parameter '" + name + "' has shape " + diff::to_string(p.value.shape()) + ", expected " +
                          diff::to_string(shape));
    }
    if (p.group != group) throw ContractError("parameter '" + name + "' is in the wrong learning-rate group");
    return id;
  }
  diff::Buffer<Real> value(std::move(shape));
  if (init.kind == Init::Kind::uniform) {
    std::uniform_real_distribution<double> dist(-init.bound, init.bound);
    for (Real& v : value.span()) v = static_cast<Real>(dist(*rng_));
  }
  return store_->add(name, group, std::move(value));
}

template <typename Real>
Mlp<Real> Mlp<Real>::declare(ParamDeclarer<Real>& params, const std::string& prefix, std::vector<std::size_t> widths,
                             std::size_t ray_inputs, bool zero_output, diff::ParamGroup group) {
  if (widths.size() < 2) throw ContractError("mlp '" + prefix + "': need at least input and output widths");
  Mlp mlp;
  mlp.widths_ = widths;
  mlp.ray_inputs_ = ray_inputs;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t in = widths[l], out = widths[l + 1];
    const std::size_t fan_in = in + (l == 0 ? ray_inputs : 0);
    const bool last = l + 2 == widths.size();
    const Init init = (last && zero_output) ? Init::zero() : Init::uniform(1.0 / std::sqrt(static_cast<double>(fan_in)));
    const std::string base = prefix + "." + std::to_string(l);
    Layer layer;
    layer.weight = params.declare(base + ".weight", group, {out, in}, init);
    if (l == 0 && ray_inputs > 0) layer.ray_weight = params.declare(base + ".weight_ray", group, {out, ray_inputs}, init);
    layer.bias = params.declare(base + ".bias", group, {out}, init);
    mlp.layers_.push_back(layer);
  }
  return mlp;
}

template <typename Real>
diff::Var<Real> Mlp<Real>::forward(diff::Tape<Real>& tape, const diff::ParamStore<Real>& store, diff::Var<Real> x,
                                   std::optional<diff::Var<Real>> ray_x, std::size_t samples_per_ray) const {
  if (ray_x.has_value() != (ray_inputs_ > 0)) {
    throw ContractError("mlp: per-ray input supplied to a network that does not take one, or missing");
  }
  diff::Var<Real> h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    h = diff::linear(h, tape.parameter(store, layer.weight), tape.parameter(store, layer.bias));
    if (l == 0 && layer.ray_weight) {
      const auto per_ray = diff::linear(*ray_x, tape.parameter(store, *layer.ray_weight));
      h = diff::add(h, diff::repeat_rows(per_ray, samples_per_ray));
    }
    if (l + 1 < layers_.size()) h = diff::relu(h);
  }
  return h;
}

template class ParamDeclarer<float>;
template class ParamDeclarer<double>;
template class Mlp<float>;
template class Mlp<double>;

}  // namespace movox::fields
