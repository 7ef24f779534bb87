// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "movox/diff/tape.hpp"
#include "movox/grids/voxel_grid.hpp"

// Grid sampling.
//
// A world point p maps to continuous lattice coordinates u = (p − min)/h, clamped
// to [0, L−1] per axis, so points outside the box read the value at their
// projection onto it. The containing cell is c = clamp(⌊u⌋, 0, L−2).
//
// K-distance interpolation concatenates K trilinear blends. Scale s (1..K) uses
// the corner nodes c − (s−1) and c + s on every axis, i.e. the containing cell
// dilated to an edge of 2s−1 voxels around its own center, and blends them with
// weight (u − (c − s + 1))/(2s − 1). Corner indices past the lattice edge are
// clamped (edge replication). s = 1 is plain trilinear interpolation. Because the
// corner set follows the containing cell, scales s ≥ 2 jump at cell faces; all
// outputs are smooth inside a cell.
namespace movox::grids {

/// Per-axis stencil of one scale: the two lattice indices and their weights.
template <typename Real>
struct AxisStencil {
  std::size_t index[2];
  Real weight[2];
  Real dweight;  // d(weight[1])/du; d(weight[0])/du = −dweight
};

/// Continuous lattice location of a point along with its clamping state.
template <typename Real>
struct LatticePoint {
  std::array<Real, 3> u{};
  std::array<std::size_t, 3> cell{};
  std::array<bool, 3> inside{};  // false where the coordinate was clamped
};

template <typename Real>
LatticePoint<Real> locate(const GridGeometry& g, std::span<const Real, 3> p);

template <typename Real>
AxisStencil<Real> axis_stencil(const LatticePoint<Real>& lp, std::size_t axis, std::size_t scale, std::size_t L);

/// Trilinear feature (C values) at p.
template <typename Real>
std::vector<Real> trilinear_sample(const VoxelGrid<Real>& grid, std::array<Real, 3> p);

/// K-distance feature (K·C values, scale-major) at p. Throws ContractError unless 1 ≤ K ≤ L/2.
template <typename Real>
std::vector<Real> multi_distance_sample(const VoxelGrid<Real>& grid, std::array<Real, 3> p, std::size_t K);

/// Motion-grid feature at p: for basis i and scale s, θ_i · T_s(p, V_i), laid out
/// basis-major, scale-minor, channel-fastest ((i·K + s)·C + c). Throws
/// ContractError if θ does not have one entry per basis.
template <typename Real>
std::vector<Real> mvg_sample(const MvgBases<Real>& bases, std::span<const Real> theta, std::array<Real, 3> p,
                             std::size_t K);

void validate_scale_count(const GridGeometry& g, std::size_t K);

// Tape ops -------------------------------------------------------------------

/// K-distance sampling of a grid stored in `values` ([L,L,L,C]) at `points` [B,3];
/// returns [B, K·C]. Differentiable in both the grid values and the points.
template <typename Real>
diff::Var<Real> sample_grid(const GridGeometry& g, diff::Var<Real> values, diff::Var<Real> points, std::size_t K);

/// Motion-grid sampling. `theta` is [R, N] (one row per ray), `points` is
/// [R·samples_per_ray, 3] with each ray's samples contiguous. Returns
/// [R·samples_per_ray, N·K·C] in the mvg_sample layout. Differentiable in the
/// basis values and the points; θ is data.
template <typename Real>
diff::Var<Real> sample_mvg(const GridGeometry& g, std::span<const diff::Var<Real>> bases,
                           const diff::Buffer<Real>& theta, std::size_t samples_per_ray, diff::Var<Real> points,
                           std::size_t K);

}  // namespace movox::grids
