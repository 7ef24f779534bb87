// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "json.hpp"

#include "movox/fields/model.hpp"

namespace movox::train {

struct TrainConfig {
  std::size_t rays_per_batch = 4096;
  std::size_t samples_per_ray = 64;
  std::size_t total_iters = 10000;
  double lr_grids = 1e-2;
  double lr_mlps = 1e-3;
  std::vector<std::size_t> lr_drop_iters{500, 2000};
  double lr_drop_factor = 1.0 / 3.0;
  double lambda = 0.01;
  std::size_t coarse_res = 256;  // image width; 0 keeps the native size
  std::size_t coarse_iters = 6000;
  std::size_t fine_res = 512;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::size_t chunk_rays = 1024;
  std::vector<std::size_t> preview_iters{100, 300, 1000, 3000, 10000};
  std::size_t log_every = 10;

  /// Throws ContractError naming the first violated invariant.
  void validate() const;

  /// Learning rate of a group at iteration `iter` (1-based): the base rate times
  /// lr_drop_factor for every drop iteration ≤ iter.
  double learning_rate(double base, std::size_t iter) const;
  /// Image width used at iteration `iter`.
  std::size_t resolution_at(std::size_t iter) const { return iter <= coarse_iters ? coarse_res : fine_res; }
};

nlohmann::json to_json(const TrainConfig& c);
/// Missing keys keep `base` values.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

/// A run file: {"model": {...}, "train": {...}}; either part may be omitted.
struct RunConfig {
  fields::ModelConfig model;
  TrainConfig train;
};
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
nlohmann::json to_json(const RunConfig& c);

}  // namespace movox::train
