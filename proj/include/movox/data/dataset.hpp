// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "movox/image.hpp"
#include "movox/render/camera.hpp"

// Manifest schema (version 1), one JSON document:
//   { "version": 1, "expression_dims": N,
//     "box": {"min": [x, y, z], "edge": e}, "near": t_n, "far": t_f,
//     "background": [r, g, b],
//     "frames": [ { "image": "rel/path.png", "mask": "rel/mask.png" (optional),
//                   "split": "train" | "test",
//                   "camera": {"width", "height", "fx", "fy", "cx", "cy",
//                              "rotation": [9, row-major camera-to-world],
//                              "translation": [3]},
//                   "theta": [N] } ] }
// Paths are relative to the manifest's directory.
namespace movox::data {

inline constexpr int kManifestVersion = 1;

struct FrameSpec {
  std::string image;
  std::optional<std::string> mask;
  std::string split = "train";
  render::Camera camera;
  std::vector<double> theta;
};

struct Manifest {
  int version = kManifestVersion;
  std::size_t expression_dims = 0;
  grids::Box box{};
  double near = 0.0;
  double far = 10.0;
  std::array<double, 3> background{1.0, 1.0, 1.0};
  std::vector<FrameSpec> frames;
  std::string directory;  // set by load_manifest; not serialized

  render::RayBounds bounds() const { return {near, far, box}; }
};

nlohmann::json to_json(const Manifest& m);
/// Parses and validates structure (version, θ lengths, orthonormal poses). Throws IoError.
Manifest manifest_from_json(const nlohmann::json& j);
Manifest load_manifest(const std::string& path);
void save_manifest(const Manifest& m, const std::string& path);

struct Frame {
  Image rgb;  // composited over the background
  render::Camera camera;
  std::vector<double> theta;
  std::size_t index = 0;  // position in the manifest
};

struct Dataset {
  Manifest manifest;
  std::vector<Frame> frames;
};

struct LoadOptions {
  std::string split;           // "" keeps every frame
  std::size_t resolution = 0;  // target width (0 keeps native); height scales along
  bool load_images = true;     // false: poses and θ only (reenactment sources)
};

/// Loads frames and images. Errors (IoError): empty dataset, missing files,
/// θ length mismatch, non-orthonormal pose, non-integer downsampling factor.
Dataset load_dataset(const std::string& manifest_path, const LoadOptions& options = {});

/// Box-filter downsampling by an integer factor.
Image area_downsample(const Image& image, std::size_t factor);

/// out = img·m + bg·(1 − m) per pixel; `mask` has one channel.
Image composite_mask(const Image& image, const Image& mask, const std::array<double, 3>& background);

nlohmann::json camera_to_json(const render::Camera& c);
render::Camera camera_from_json(const nlohmann::json& j);

}  // namespace movox::data
