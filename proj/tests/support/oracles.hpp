// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

// Reference implementations used only by tests. Each one is written the slow,
// obvious way and shares no code with the library paths it checks.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "movox/grids/voxel_grid.hpp"
#include "movox/image.hpp"

namespace movox::oracle {

/// Value of channel c at lattice node (i, j, k) of a node-major, channel-minor grid,
/// with indices clamped to the lattice.
template <typename Real>
double node_value(const grids::VoxelGrid<Real>& g, long i, long j, long k, std::size_t c) {
  const long last = static_cast<long>(g.geometry.resolution) - 1;
  auto clampi = [last](long v) { return static_cast<std::size_t>(std::clamp(v, 0L, last)); };
  return static_cast<double>(g.at(clampi(i), clampi(j), clampi(k), c));
}

/// K-distance sample by explicit gathering of the 8 dilated corners of every scale.
/// Output is scale-major: [s·C + c].
template <typename Real>
std::vector<double> gather_sample(const grids::VoxelGrid<Real>& g, std::array<double, 3> p, std::size_t K) {
  const auto& geo = g.geometry;
  const double L = static_cast<double>(geo.resolution);
  const double h = geo.domain.edge / (L - 1.0);
  double u[3];
  long cell[3];
  for (int a = 0; a < 3; ++a) {
    u[a] = std::clamp((p[a] - geo.domain.min[a]) / h, 0.0, L - 1.0);
    cell[a] = std::min(static_cast<long>(std::floor(u[a])), static_cast<long>(geo.resolution) - 2);
  }
  std::vector<double> out(K * geo.channels, 0.0);
  for (std::size_t s = 1; s <= K; ++s) {
    const long ls = static_cast<long>(s);
    long lo[3], hi[3];
    double t[3];
    for (int a = 0; a < 3; ++a) {
      lo[a] = cell[a] - (ls - 1);
      hi[a] = cell[a] + ls;
      t[a] = (u[a] - static_cast<double>(lo[a])) / static_cast<double>(2 * ls - 1);
    }
    for (int corner = 0; corner < 8; ++corner) {
      const bool bx = corner & 1, by = corner & 2, bz = corner & 4;
      const double w = (bx ? t[0] : 1 - t[0]) * (by ? t[1] : 1 - t[1]) * (bz ? t[2] : 1 - t[2]);
      for (std::size_t c = 0; c < geo.channels; ++c) {
        out[(s - 1) * geo.channels + c] +=
            w * node_value(g, bx ? hi[0] : lo[0], by ? hi[1] : lo[1], bz ? hi[2] : lo[2], c);
      }
    }
  }
  return out;
}

/// Motion-grid feature by materializing θ₁V₁ ⊕ … ⊕ θ_N V_N as one N·C-channel grid,
/// sampling it, and reordering the scale-major result into (i·K + s)·C + c.
template <typename Real>
std::vector<double> materialized_mvg(const grids::MvgBases<Real>& bases, const std::vector<double>& theta,
                                     std::array<double, 3> p, std::size_t K) {
  const auto& g = bases.geometry;
  const std::size_t C = g.channels, N = bases.count();
  grids::GridGeometry wide = g;
  wide.channels = N * C;
  grids::VoxelGrid<double> big(wide);
  for (std::size_t node = 0; node < g.node_count(); ++node) {
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t c = 0; c < C; ++c) {
        big.values[node * N * C + i * C + c] = theta[i] * static_cast<double>(bases.bases[i][node * C + c]);
      }
    }
  }
  const std::vector<double> scale_major = gather_sample(big, p, K);
  std::vector<double> out(N * K * C);
  for (std::size_t s = 0; s < K; ++s) {
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t c = 0; c < C; ++c) out[(i * K + s) * C + c] = scale_major[s * N * C + i * C + c];
    }
  }
  return out;
}

/// Ray–box intersection by clipping the parametric line against each slab pair.
inline bool slab_interval(std::array<double, 3> o, std::array<double, 3> d, std::array<double, 3> lo,
                          std::array<double, 3> hi, double& t0, double& t1) {
  t0 = -1e300;
  t1 = 1e300;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < lo[a] || o[a] > hi[a]) return false;
      continue;
    }
    double ta = (lo[a] - o[a]) / d[a], tb = (hi[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return t0 < t1;
}

/// 64-bit mean squared error.
inline double mse(const Image& a, const Image& b) {
  long double acc = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const long double d = static_cast<long double>(a.pixels[i]) - b.pixels[i];
    acc += d * d;
  }
  return static_cast<double>(acc / a.pixels.size());
}

template <typename Real>
void fill_random(std::vector<Real>& v, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> U(lo, hi);
  for (auto& x : v) x = static_cast<Real>(U(rng));
}

}  // namespace movox::oracle
