// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "movox/diff/buffer.hpp"

namespace movox::diff {

/// Learning-rate group. Voxel grids and MLP weights train at different rates.
enum class ParamGroup : std::uint8_t { grids = 0, mlps = 1 };

std::string_view to_string(ParamGroup group);
ParamGroup parse_param_group(std::string_view name);

/// Index of a parameter inside its ParamStore.
struct ParamId {
  std::size_t index = 0;
  friend bool operator==(ParamId, ParamId) = default;
};

template <typename Real>
struct Parameter {
  std::string name;
  ParamGroup group = ParamGroup::mlps;
  Buffer<Real> value;
};

/// First/second moment estimates plus the per-parameter step counter.
template <typename Real>
struct AdamMoments {
  Buffer<Real> m;
  Buffer<Real> v;
  std::uint64_t step = 0;
};

/// Flat registry of named trainable buffers and their optimizer state.
template <typename Real>
class ParamStore {
 public:
  ParamId add(std::string name, ParamGroup group, Buffer<Real> init);

  std::size_t size() const noexcept { return params_.size(); }
  std::size_t total_elements() const noexcept;

  Parameter<Real>& operator[](ParamId id) { return params_.at(id.index); }
  const Parameter<Real>& operator[](ParamId id) const { return params_.at(id.index); }

  std::optional<ParamId> find(std::string_view name) const;
  ParamId require(std::string_view name) const;

  AdamMoments<Real>& moments(ParamId id) { return moments_.at(id.index); }
  const AdamMoments<Real>& moments(ParamId id) const { return moments_.at(id.index); }

  double learning_rate(ParamGroup group) const { return lr_[static_cast<std::size_t>(group)]; }
  void set_learning_rate(ParamGroup group, double lr) { lr_[static_cast<std::size_t>(group)] = lr; }

  std::span<const Parameter<Real>> parameters() const noexcept { return params_; }

  /// Copy of values and optimizer state in another precision (used by the float64 oracles).
  template <typename Other>
  ParamStore<Other> cast() const {
    ParamStore<Other> out;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const ParamId id = out.add(params_[i].name, params_[i].group, params_[i].value.template cast<Other>());
      auto& m = out.moments(id);
      m.m = moments_[i].m.template cast<Other>();
      m.v = moments_[i].v.template cast<Other>();
      m.step = moments_[i].step;
    }
    out.set_learning_rate(ParamGroup::grids, learning_rate(ParamGroup::grids));
    out.set_learning_rate(ParamGroup::mlps, learning_rate(ParamGroup::mlps));
    return out;
  }

 private:
  std::vector<Parameter<Real>> params_;
  std::vector<AdamMoments<Real>> moments_;
  std::unordered_map<std::string, std::size_t> by_name_;
  double lr_[2] = {1e-2, 1e-3};
};

/// Gradient accumulators aligned one-to-one with a ParamStore.
template <typename Real>
class GradientSet {
 public:
  GradientSet() = default;
  explicit GradientSet(const ParamStore<Real>& store);

  std::size_t size() const noexcept { return grads_.size(); }
  Buffer<Real>& operator[](ParamId id) { return grads_.at(id.index); }
  const Buffer<Real>& operator[](ParamId id) const { return grads_.at(id.index); }

  void zero();
  /// grads += other, element by element, in parameter order.
  void accumulate(const GradientSet& other);

 private:
  std::vector<Buffer<Real>> grads_;
};

}  // namespace movox::diff
