// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "movox/diff/param_store.hpp"
#include "movox/diff/tape.hpp"
#include "movox/fields/mlp.hpp"
#include "movox/grids/voxel_grid.hpp"

namespace movox::fields {

enum class Variant { full, no_decouple, mlp_deform };

/// "full", "no-decouple", "mlp-deform" (underscores accepted too).
std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

struct GridSpec {
  std::size_t channels = 1;
  std::size_t resolution = 2;
};

struct ModelConfig {
  Variant variant = Variant::full;
  std::size_t expression_dims = 32;
  std::size_t scales = 3;                 // K
  GridSpec appearance{4, 32};
  GridSpec motion{2, 64};
  GridSpec no_decouple{4, 64};
  std::size_t hidden = 64;
  std::size_t deform_hidden = 128;
  std::size_t deform_layers = 4;
  std::size_t feature_frequencies = 4;
  std::size_t direction_frequencies = 4;
  std::size_t position_frequencies = 4;   // mlp_deform only
  double density_shift = 1.0;
  double appearance_init = 1e-2;
  grids::Box domain{};

  /// Throws ContractError on zero counts or K outside [1, L/2] for any used grid.
  void validate() const;
  grids::GridGeometry geometry(const GridSpec& spec) const { return {spec.channels, spec.resolution, domain}; }
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Sample points grouped by ray: rows [r·M, (r+1)·M) of `points` belong to ray r.
template <typename Real>
struct SampleBatch {
  diff::Buffer<Real> points;      // [R·M, 3]
  diff::Buffer<Real> directions;  // [R, 3]; normalized on use
  diff::Buffer<Real> theta;       // [R, N]
  std::size_t samples_per_ray = 1;

  std::size_t rays() const { return directions.rows(); }
  /// Throws ShapeError unless the three buffers agree on R and M.
  void validate(std::size_t expression_dims) const;
};

template <typename Real>
struct FieldOutput {
  diff::Var<Real> rgb;                    // [R·M, 3], in [0, 1]
  diff::Var<Real> sigma;                  // [R·M, 1], ≥ 0
  std::optional<diff::Var<Real>> offset;  // [R·M, 3]; absent for no_decouple (δx ≡ 0)
};

/// Canonical appearance Φ: one K-distance grid and a head MLP fed with γ(v_a)
/// per sample and [γ(d), θ] per ray.
template <typename Real>
struct AppearanceField {
  grids::GridGeometry geometry;
  diff::ParamId grid;
  Mlp<Real> head;
};

/// Expression motion Ω: N motion bases and the deformation MLP f_d(v_d).
template <typename Real>
struct MotionField {
  grids::GridGeometry geometry;
  std::vector<diff::ParamId> bases;
  Mlp<Real> head;
};

/// The avatar and its two ablations. Holds parameter ids only; values live in a
/// ParamStore passed to each query, so the same model serves float training and
/// float64 gradient checks on a cast store.
template <typename Real>
class AvatarModel {
 public:
  /// Declares and initializes all parameters of `config.variant` in `store`.
  static AvatarModel create(const ModelConfig& config, diff::ParamStore<Real>& store, std::uint64_t seed);
  /// Binds to parameters already in `store` (e.g. from a checkpoint), checking shapes.
  static AvatarModel bind(const ModelConfig& config, diff::ParamStore<Real>& store);

  const ModelConfig& config() const { return config_; }
  Variant variant() const { return config_.variant; }

  /// Per-sample (c, σ, δx) for a batch of rays.
  FieldOutput<Real> query(diff::Tape<Real>& tape, const diff::ParamStore<Real>& store,
                          const SampleBatch<Real>& batch) const;

  /// δx at the batch's sample points (full and mlp_deform only).
  diff::Var<Real> deform(diff::Tape<Real>& tape, const diff::ParamStore<Real>& store,
                         const SampleBatch<Real>& batch) const;

  /// (c, σ) of the canonical field at `canonical_points` [R·M, 3] (full and mlp_deform only).
  std::pair<diff::Var<Real>, diff::Var<Real>> query_canonical(diff::Tape<Real>& tape,
                                                              const diff::ParamStore<Real>& store,
                                                              diff::Var<Real> canonical_points,
                                                              const SampleBatch<Real>& batch) const;

  const std::optional<AppearanceField<Real>>& appearance() const { return appearance_; }
  const std::optional<MotionField<Real>>& motion() const { return motion_; }
  const std::optional<MotionField<Real>>& no_decouple() const { return no_decouple_; }
  const std::optional<Mlp<Real>>& deform_mlp() const { return deform_mlp_; }
  /// Number of parameter buffers the variant declares.
  std::size_t parameter_count() const;

 private:
  static AvatarModel declare(const ModelConfig& config, ParamDeclarer<Real>& params);

  diff::Var<Real> ray_features(diff::Tape<Real>& tape, const SampleBatch<Real>& batch) const;
  std::pair<diff::Var<Real>, diff::Var<Real>> head_outputs(diff::Var<Real> raw) const;

  ModelConfig config_;
  std::optional<AppearanceField<Real>> appearance_;
  std::optional<MotionField<Real>> motion_;
  std::optional<MotionField<Real>> no_decouple_;  // bases + head; this head emits (c, σ)
  std::optional<Mlp<Real>> deform_mlp_;
};

}  // namespace movox::fields
