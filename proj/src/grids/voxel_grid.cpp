// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/grids/voxel_grid.hpp"

#include <string>

namespace movox::grids {

void GridGeometry::validate() const {
  if (resolution < 2) throw ContractError("voxel grid: resolution must be at least 2, got " + std::to_string(resolution));
  if (channels < 1) throw ContractError("voxel grid: at least one channel required");
  if (!(domain.edge > 0.0)) throw ContractError("voxel grid: domain edge must be positive");
}

std::array<double, 3> GridGeometry::node_position(std::size_t ix, std::size_t iy, std::size_t iz) const {
  const double h = spacing();
  return {domain.min[0] + static_cast<double>(ix) * h, domain.min[1] + static_cast<double>(iy) * h,
          domain.min[2] + static_cast<double>(iz) * h};
}

template <typename Real>
void fill_uniform(std::span<Real> values, Real bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-static_cast<double>(bound), static_cast<double>(bound));
  for (Real& v : values) v = static_cast<Real>(dist(rng));
}

template void fill_uniform<float>(std::span<float>, float, std::mt19937_64&);
template void fill_uniform<double>(std::span<double>, double, std::mt19937_64&);

}  // namespace movox::grids
