// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/diff/param_store.hpp"

namespace movox::diff {

std::string_view to_string(ParamGroup group) { return group == ParamGroup::grids ? "grids" : "mlps"; }

ParamGroup parse_param_group(std::string_view name) {
  if (name == "grids") return ParamGroup::grids;
  if (name == "mlps") return ParamGroup::mlps;
  throw ContractError("unknown parameter group '" + std::string(name) + "'");
}

template <typename Real>
ParamId ParamStore<Real>::add(std::string name, ParamGroup group, Buffer<Real> init) {
  if (by_name_.contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  const ParamId id{params_.size()};
  by_name_.emplace(name, id.index);
  AdamMoments<Real> moments{Buffer<Real>(init.shape()), Buffer<Real>(init.shape()), 0};
  params_.push_back(Parameter<Real>{std::move(name), group, std::move(init)});
  moments_.push_back(std::move(moments));
  return id;
}

template <typename Real>
std::size_t ParamStore<Real>::total_elements() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename Real>
std::optional<ParamId> ParamStore<Real>::find(std::string_view name) const {
  const auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return ParamId{it->second};
}

template <typename Real>
ParamId ParamStore<Real>::require(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw ContractError("no parameter named '" + std::string(name) + "'");
}

template <typename Real>
GradientSet<Real>::GradientSet(const ParamStore<Real>& store) {
  grads_.reserve(store.size());
  for (const auto& p : store.parameters()) grads_.emplace_back(p.value.shape());
}

template <typename Real>
void GradientSet<Real>::zero() {
  for (auto& g : grads_) g.fill(Real(0));
}

template <typename Real>
void GradientSet<Real>::accumulate(const GradientSet& other) {
  if (other.grads_.size() != grads_.size()) throw ContractError("GradientSet::accumulate: misaligned sets");
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    auto dst = grads_[i].span();
    const auto src = other.grads_[i].span();
    if (dst.size() != src.size()) throw ContractError("GradientSet::accumulate: misaligned buffers");
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
}

template class ParamStore<float>;
template class ParamStore<double>;
template class GradientSet<float>;
template class GradientSet<double>;

}  // namespace movox::diff
