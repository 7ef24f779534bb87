// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "movox/grids/voxel_grid.hpp"

namespace movox::render {

using Vec3 = std::array<double, 3>;

/// Pinhole camera. Camera axes follow the usual computer-vision convention:
/// +x right, +y down, +z forward. `rotation` (row-major) and `translation` map
/// camera coordinates to world coordinates.
struct Camera {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
  Vec3 translation{0, 0, 0};
  std::size_t width = 1, height = 1;

  /// Throws ContractError unless ‖RᵀR − I‖ < 1e-5, fx, fy > 0 and the size is nonzero.
  void validate() const;
  Vec3 forward() const { return {rotation[2], rotation[5], rotation[8]}; }
  Vec3 origin() const { return translation; }
  /// Same intrinsics scaled to another image size.
  Camera resized(std::size_t new_width, std::size_t new_height) const;

  /// Camera at `eye` looking at `target`, with world `up` pointing up on screen.
  static Camera look_at(Vec3 eye, Vec3 target, Vec3 up, double focal, std::size_t width, std::size_t height);
};

/// Frobenius norm of RᵀR − I.
double orthonormality_error(const std::array<double, 9>& r);

struct Ray {
  Vec3 origin{};
  Vec3 direction{0, 0, 1};  // unit
  double near = 0.0;
  double far = 0.0;
  bool empty = false;  // missed the scene box; contributes background only
};

struct RayBounds {
  double near = 0.0;  // configured t_n
  double far = 1e9;   // configured t_f
  grids::Box box{};
};

/// Slab test against the box, then clamped to [bounds.near, bounds.far]. Rays
/// whose interval is empty are flagged.
Ray make_ray(Vec3 origin, Vec3 direction, const RayBounds& bounds);

/// Ray through the center of pixel (px, py). Throws ContractError outside the image.
Ray generate_ray(const Camera& camera, double px, double py, const RayBounds& bounds);

/// Rays for linear pixel indices (y·width + x).
std::vector<Ray> generate_rays(const Camera& camera, std::span<const std::size_t> pixels, const RayBounds& bounds);

}  // namespace movox::render
