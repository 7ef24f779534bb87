// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "movox/diff/param_store.hpp"
#include "movox/fields/model.hpp"
#include "movox/image.hpp"
#include "movox/render/camera.hpp"

namespace movox::render {

/// Sample points of a ray chunk: point rows [r·M, (r+1)·M) belong to ray r.
struct FieldQuery {
  std::span<const double> points;      // n·3
  std::span<const double> directions;  // R·3, unit
  std::span<const double> theta;       // N, shared by the whole image
  std::size_t samples_per_ray = 1;
};

/// Writes σ (n) and rgb (n·3) for every query point.
using SampleField = std::function<void(const FieldQuery&, std::span<double> sigma, std::span<double> rgb)>;

struct RenderSettings {
  std::size_t samples_per_ray = 64;
  RayBounds bounds{};
  std::array<double, 3> background{1.0, 1.0, 1.0};
  std::size_t chunk_rays = 4096;
  std::size_t workers = 1;
};

struct RenderOutput {
  Image rgb;    // 3 channels
  Image alpha;  // 1 channel
};

/// Renders every pixel of `camera` with bin-center depths. Chunks run on
/// `settings.workers` threads; each pixel's value depends only on its own ray.
RenderOutput render_image(const Camera& camera, std::span<const double> theta, const SampleField& field,
                          const RenderSettings& settings);

/// Adapts a trained model to SampleField (float inference, no gradients).
SampleField model_field(const fields::AvatarModel<float>& model, const diff::ParamStore<float>& store);

}  // namespace movox::render
