// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/render/camera.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "movox/error.hpp"

namespace movox::render {

namespace {

Vec3 normalized(Vec3 v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  if (!(n > 0.0)) throw ContractError("zero-length vector");
  return {v[0] / n, v[1] / n, v[2] / n};
}

Vec3 cross(Vec3 a, Vec3 b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

}  // namespace

double orthonormality_error(const std::array<double, 9>& r) {
  double acc = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double d = 0.0;
      for (int k = 0; k < 3; ++k) d += r[k * 3 + i] * r[k * 3 + j];
      d -= (i == j) ? 1.0 : 0.0;
      acc += d * d;
    }
  }
  return std::sqrt(acc);
}

void Camera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ContractError("camera: focal lengths must be positive");
  if (width == 0 || height == 0) throw ContractError("camera: image size must be nonzero");
  const double err = orthonormality_error(rotation);
  if (!(err < 1e-5)) throw ContractError("camera: rotation is not orthonormal (|RtR - I| = " + std::to_string(err) + ")");
}

Camera Camera::resized(std::size_t new_width, std::size_t new_height) const {
  Camera c = *this;
  const double sx = static_cast<double>(new_width) / static_cast<double>(width);
  const double sy = static_cast<double>(new_height) / static_cast<double>(height);
  c.fx *= sx;
  c.cx *= sx;
  c.fy *= sy;
  c.cy *= sy;
  c.width = new_width;
  c.height = new_height;
  return c;
}

Camera Camera::look_at(Vec3 eye, Vec3 target, Vec3 up, double focal, std::size_t width, std::size_t height) {
  const Vec3 z = normalized({target[0] - eye[0], target[1] - eye[1], target[2] - eye[2]});
  const Vec3 x = normalized(cross(z, up));
  const Vec3 y = cross(z, x);
  Camera c;
  c.fx = c.fy = focal;
  c.cx = 0.5 * static_cast<double>(width);
  c.cy = 0.5 * static_cast<double>(height);
  c.rotation = {x[0], y[0], z[0], x[1], y[1], z[1], x[2], y[2], z[2]};
  c.translation = eye;
  c.width = width;
  c.height = height;
  return c;
}

Ray make_ray(Vec3 origin, Vec3 direction, const RayBounds& bounds) {
  Ray ray;
  ray.origin = origin;
  ray.direction = normalized(direction);
  const auto lo = bounds.box.min;
  const auto hi = bounds.box.max();
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  bool miss = false;
  for (int a = 0; a < 3; ++a) {
    const double o = origin[a], d = ray.direction[a];
    if (d == 0.0) {
      miss |= o < lo[a] || o > hi[a];  // parallel and outside
      continue;
    }
    double ta = (lo[a] - o) / d, tb = (hi[a] - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  ray.near = std::max(t0, bounds.near);
  ray.far = std::min(t1, bounds.far);
  ray.empty = miss || !(ray.near < ray.far);
  if (ray.empty) ray.near = ray.far = bounds.near;
  return ray;
}

Ray generate_ray(const Camera& c, double px, double py, const RayBounds& bounds) {
  if (px < 0.0 || py < 0.0 || px >= static_cast<double>(c.width) || py >= static_cast<double>(c.height)) {
    throw ContractError("pixel (" + std::to_string(px) + ", " + std::to_string(py) + ") outside a " +
                        std::to_string(c.width) + "x" + std::to_string(c.height) + " image");
  }
  const double u = (px + 0.5 - c.cx) / c.fx;
  const double v = (py + 0.5 - c.cy) / c.fy;
  const auto& r = c.rotation;
  const Vec3 d{r[0] * u + r[1] * v + r[2], r[3] * u + r[4] * v + r[5], r[6] * u + r[7] * v + r[8]};
  return make_ray(c.translation, d, bounds);
}

std::vector<Ray> generate_rays(const Camera& camera, std::span<const std::size_t> pixels, const RayBounds& bounds) {
  std::vector<Ray> rays;
  rays.reserve(pixels.size());
  for (std::size_t p : pixels) {
    if (p >= camera.width * camera.height) throw ContractError("pixel index " + std::to_string(p) + " out of range");
    rays.push_back(generate_ray(camera, static_cast<double>(p % camera.width), static_cast<double>(p / camera.width),
                                bounds));
  }
  return rays;
}

}  // namespace movox::render
