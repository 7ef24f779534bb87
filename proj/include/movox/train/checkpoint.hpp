// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

#include "movox/diff/param_store.hpp"
#include "movox/fields/model.hpp"
#include "movox/train/config.hpp"

// Checkpoint container:
//   8 bytes  magic "MOVOXCK\0"
//   u32      format version (little endian)
//   u64      header length H
//   H bytes  JSON header: {"variant", "model", "train", "iteration",
//            "params": [{"name", "group", "shape", "step", "offset"}]}
//   payload  float32 blobs; for each parameter value, Adam m, Adam v, each
//            element_count(shape) floats, starting at `offset` floats.
namespace movox::train {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  fields::ModelConfig model;
  TrainConfig train;
  std::size_t iteration = 0;
  diff::ParamStore<float> store;
};

/// Writes to `path` via a temporary file and rename. Throws IoError.
void save_checkpoint(const std::string& path, const fields::ModelConfig& model, const TrainConfig& train,
                     std::size_t iteration, const diff::ParamStore<float>& store);

/// Throws IoError on a missing, truncated or foreign file.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace movox::train
