// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "movox/data/dataset.hpp"
#include "movox/image.hpp"
#include "movox/render/camera.hpp"

// Synthetic dynamic scene: Gaussian density blobs with linearly varying color,
// moved by an expression-linear offset field.
//
// Canonical density σ(x) = Σ_j peak_j · exp(−3‖x − c_j‖²/r_j²); color is the
// density-weighted mean of per-blob colors rgb_j + G_j (x − c_j)/r_j (clamped).
// The ground-truth offset is δx(x, θ) = Σ_j ŵ_j(x) Σ_i θ_i · scale · d_ij, where
// ŵ_j = w_j / max(1, Σ_k w_k) and w_j is 1 within inner·r_j of c_j, falls off
// smoothly, and is 0 beyond outer·r_j. Observed fields are canonical(x + δx).
namespace movox::data {

using render::Vec3;

struct Blob {
  Vec3 center{};
  double radius = 0.25;
  double peak = 20.0;
  Vec3 rgb{0.5, 0.5, 0.5};
  std::array<double, 9> gradient{};  // row-major, color change per radius
};

struct SceneSpec {
  std::size_t expression_dims = 4;
  std::vector<Blob> blobs;
  std::vector<std::vector<Vec3>> motion;  // [N][blobs]
  double motion_scale = 1.0;              // 0 gives a static scene
  double falloff_inner = 1.5;
  double falloff_outer = 2.25;

  std::size_t train_frames = 100;
  std::size_t test_frames = 20;
  double theta_range = 1.0;
  std::uint64_t seed = 7;

  std::size_t width = 64;
  std::size_t height = 64;
  double focal = 85.0;
  double orbit_distance = 3.2;
  double elevation_deg = 20.0;
  std::size_t oracle_samples = 1024;
  double near = 0.5;
  double far = 6.0;
  grids::Box box{};
  std::array<double, 3> background{1.0, 1.0, 1.0};

  std::size_t probes_per_blob = 4;
  double probe_radius = 0.5;  // fraction of blob radius

  /// Throws ContractError describing the first invalid field.
  void validate() const;
};

/// Three blobs, N = 4, motion directions drawn from `seed`.
SceneSpec default_scene_spec(std::uint64_t seed = 7);

nlohmann::json to_json(const SceneSpec& s);
/// Missing keys keep default_scene_spec values.
SceneSpec scene_spec_from_json(const nlohmann::json& j);

class SyntheticScene {
 public:
  explicit SyntheticScene(SceneSpec spec);
  const SceneSpec& spec() const { return spec_; }

  Vec3 offset(const Vec3& x, std::span<const double> theta) const;
  double canonical_density(const Vec3& x) const;
  Vec3 canonical_color(const Vec3& x) const;
  /// Observed-space density and color: canonical(x + δx(x, θ)).
  void query(const Vec3& x, std::span<const double> theta, double& sigma, Vec3& rgb) const;

  /// Observation-space point that maps onto `target` in canonical space (fixed-point solve).
  Vec3 preimage(const Vec3& target, std::span<const double> theta) const;

 private:
  SceneSpec spec_;
};

struct OracleImage {
  Image rgb;
  Image alpha;
};

/// Dense midpoint quadrature of the observed field along each pixel ray.
OracleImage oracle_render(const SyntheticScene& scene, const render::Camera& camera, std::span<const double> theta,
                          std::size_t samples);

struct Probe {
  std::size_t blob = 0;
  Vec3 point{};   // observation space
  Vec3 offset{};  // analytic δx at point
};

struct ProbeFrame {
  std::size_t frame = 0;  // manifest index
  std::string split;
  std::vector<double> theta;
  std::vector<Probe> probes;
};

struct Sidecar {
  SceneSpec spec;
  std::vector<ProbeFrame> frames;
  std::vector<std::string> alpha_images;  // per manifest frame, relative paths
};

nlohmann::json to_json(const Sidecar& s);
Sidecar load_sidecar(const std::string& path);

struct SynthResult {
  std::string manifest_path;
  std::string sidecar_path;
  std::size_t frames = 0;
};

/// Writes images/, alpha/, manifest.json and sidecar.json under `directory`.
SynthResult synth_generate(const SceneSpec& spec, const std::string& directory, std::size_t workers = 1);

}  // namespace movox::data
