// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "movox/render/camera.hpp"

namespace movox::render {

/// t_i = near + (i + u_i)·(far − near)/M with u_i ~ U[0, 1), one per sub-interval.
std::vector<double> stratified_sample(const Ray& ray, std::size_t M, std::mt19937_64& rng);

/// Same with every u_i = 1/2: the bin centers.
std::vector<double> bin_centers(const Ray& ray, std::size_t M);

/// Depths from explicit jitters u_i ∈ [0, 1].
std::vector<double> stratified_from(const Ray& ray, std::span<const double> jitter);

/// δt_i = t_{i+1} − t_i; the last is far − t_M.
std::vector<double> sample_deltas(std::span<const double> depths, double far);

}  // namespace movox::render
