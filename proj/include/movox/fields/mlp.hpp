// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "movox/diff/param_store.hpp"
#include "movox/diff/tape.hpp"

namespace movox::fields {

/// How a declared parameter is initialized when it is created.
struct Init {
  enum class Kind { zero, uniform } kind = Kind::zero;
  double bound = 0.0;

  static Init zero() { return {}; }
  static Init uniform(double bound) { return {Kind::uniform, bound}; }
};

/// Creates parameters in a fresh store, or looks up existing ones by name.
///
/// Model components declare every parameter through this one path, so the same
/// code builds a randomly initialized model and re-binds one loaded from a
/// checkpoint (where shapes are verified instead of values drawn).
template <typename Real>
class ParamDeclarer {
 public:
  /// Create mode: new parameters drawn from `rng`.
  ParamDeclarer(diff::ParamStore<Real>& store, std::mt19937_64& rng) : store_(&store), rng_(&rng) {}
  /// Bind mode: parameters must already exist with the declared shape.
  explicit ParamDeclarer(diff::ParamStore<Real>& store) : store_(&store) {}

  diff::ParamId declare(const std::string& name, diff::ParamGroup group, diff::Shape shape, Init init);

 private:
  diff::ParamStore<Real>* store_;
  std::mt19937_64* rng_ = nullptr;
};

/// Fully connected network with relu between layers and a linear head.
///
/// The first layer may take a second, per-ray input whose contribution is
/// computed once per ray and repeated across that ray's samples; this is the
/// same affine map as concatenating the per-ray features onto every sample.
template <typename Real>
class Mlp {
 public:
  struct Layer {
    diff::ParamId weight;
    std::optional<diff::ParamId> ray_weight;
    diff::ParamId bias;
  };

  Mlp() = default;

  /// `widths` = {per-sample inputs, hidden..., outputs}. Weights and biases start
  /// at U(−1/√fan_in, 1/√fan_in); when `zero_output` the last layer starts at 0.
  static Mlp declare(ParamDeclarer<Real>& params, const std::string& prefix, std::vector<std::size_t> widths,
                     std::size_t ray_inputs, bool zero_output, diff::ParamGroup group = diff::ParamGroup::mlps);

  /// `x` is [R·M, in]; `ray_x` (when the MLP has per-ray inputs) is [R, ray_in].
  diff::Var<Real> forward(diff::Tape<Real>& tape, const diff::ParamStore<Real>& store, diff::Var<Real> x,
                          std::optional<diff::Var<Real>> ray_x, std::size_t samples_per_ray) const;

  std::size_t input_width() const { return widths_.front(); }
  std::size_t ray_input_width() const { return ray_inputs_; }
  std::size_t output_width() const { return widths_.back(); }
  std::size_t layer_count() const { return layers_.size(); }
  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t parameter_count() const { return 2 * layers_.size() + (ray_inputs_ > 0 ? 1 : 0); }

 private:
  std::vector<std::size_t> widths_;
  std::size_t ray_inputs_ = 0;
  std::vector<Layer> layers_;
};

}  // namespace movox::fields
