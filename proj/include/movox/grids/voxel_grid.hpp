// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "movox/diff/buffer.hpp"

namespace movox::grids {

/// Axis-aligned cube in world units.
struct Box {
  std::array<double, 3> min{-1.0, -1.0, -1.0};
  double edge = 2.0;

  std::array<double, 3> max() const { return {min[0] + edge, min[1] + edge, min[2] + edge}; }
  bool operator==(const Box&) const = default;
};

/// Extents of a dense C×L×L×L lattice spanning `domain` with nodes on the box faces.
///
/// Values are stored node-major, channel-minor: node (ix, iy, iz) channel c lives at
/// ((iz·L + iy)·L + ix)·C + c.
struct GridGeometry {
  std::size_t channels = 1;
  std::size_t resolution = 2;
  Box domain{};

  /// Throws ContractError unless L ≥ 2, C ≥ 1 and the box edge is positive.
  void validate() const;

  std::size_t node_count() const { return resolution * resolution * resolution; }
  std::size_t value_count() const { return node_count() * channels; }
  double spacing() const { return domain.edge / static_cast<double>(resolution - 1); }
  diff::Shape shape() const { return {resolution, resolution, resolution, channels}; }
  std::size_t node_index(std::size_t ix, std::size_t iy, std::size_t iz) const {
    return (iz * resolution + iy) * resolution + ix;
  }
  std::array<double, 3> node_position(std::size_t ix, std::size_t iy, std::size_t iz) const;

  bool operator==(const GridGeometry&) const = default;
};

/// A lattice with owned feature values.
template <typename Real>
struct VoxelGrid {
  GridGeometry geometry;
  diff::Buffer<Real> values;

  explicit VoxelGrid(GridGeometry g, Real fill = Real(0)) : geometry(g), values(g.shape(), fill) { g.validate(); }

  Real& at(std::size_t ix, std::size_t iy, std::size_t iz, std::size_t c) {
    return values[geometry.node_index(ix, iy, iz) * geometry.channels + c];
  }
  Real at(std::size_t ix, std::size_t iy, std::size_t iz, std::size_t c) const {
    return values[geometry.node_index(ix, iy, iz) * geometry.channels + c];
  }
};

/// N bases sharing one geometry; the motion grid is their θ-weighted channel concatenation.
template <typename Real>
struct MvgBases {
  GridGeometry geometry;
  std::vector<diff::Buffer<Real>> bases;

  MvgBases(GridGeometry g, std::size_t count) : geometry(g), bases(count, diff::Buffer<Real>(g.shape())) {
    g.validate();
  }
  std::size_t count() const { return bases.size(); }
};

/// Fills a grid's values with U(-bound, bound).
template <typename Real>
void fill_uniform(std::span<Real> values, Real bound, std::mt19937_64& rng);

}  // namespace movox::grids
