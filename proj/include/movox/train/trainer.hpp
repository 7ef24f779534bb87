// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "movox/data/dataset.hpp"
#include "movox/diff/param_store.hpp"
#include "movox/fields/model.hpp"
#include "movox/render/camera.hpp"
#include "movox/train/config.hpp"

namespace movox::train {

/// Rays drawn for one step, with their stratification jitter and targets.
struct RayBatch {
  std::vector<render::Ray> rays;
  std::vector<std::size_t> frame;  // index into Dataset::frames
  std::vector<std::size_t> pixel;  // y·width + x
  std::vector<std::array<float, 3>> target;
  std::vector<std::vector<double>> theta;  // per ray
  std::vector<double> jitter;              // rays × samples, in [0, 1); 0.5 = bin centers
  std::size_t samples_per_ray = 0;

  std::size_t size() const { return rays.size(); }
};

/// `count` rays drawn uniformly (with replacement) over every frame and pixel,
/// from an RNG seeded by (seed, iteration) alone. `jittered = false` uses bin centers.
RayBatch draw_batch(const data::Dataset& dataset, std::size_t count, std::size_t samples_per_ray, std::uint64_t seed,
                    std::size_t iteration, bool jittered = true);

/// Loss pieces for a subset of a batch, on one tape.
template <typename Real>
struct LossTerms {
  std::optional<diff::Var<Real>> total;        // photo + λ·reg on the tape (absent if all rays were empty)
  std::optional<diff::Var<Real>> photo;        // tape part of the photometric term
  std::optional<diff::Var<Real>> reg;          // unweighted Σ‖δx‖
  std::optional<diff::Var<Real>> rendered;     // [R', 4] for the non-empty rays
  double empty_photo = 0.0;                    // Σ|bg − gt| over empty rays (constant)
  double squared_error = 0.0;                  // Σ over rays and channels, for PSNR
  std::size_t samples = 0;                     // non-empty rays × M
};

/// Renders rays [begin, end) of `batch` through the model and builds the loss.
template <typename Real>
LossTerms<Real> build_loss(diff::Tape<Real>& tape, const fields::AvatarModel<Real>& model,
                           const diff::ParamStore<Real>& store, const RayBatch& batch, std::size_t begin,
                           std::size_t end, double lambda, const std::array<double, 3>& background);

struct StepStats {
  std::size_t iteration = 0;
  double total = 0.0;
  double photo = 0.0;
  double reg = 0.0;  // λ·Σ‖δx‖
  double mean_offset = 0.0;
  double batch_psnr = 0.0;
  double lr_grids = 0.0;
  double lr_mlps = 0.0;
  double ms = 0.0;
};

/// Owns the per-worker gradient buffers for a model/store pair.
class Trainer {
 public:
  Trainer(const fields::AvatarModel<float>& model, diff::ParamStore<float>& store, TrainConfig config,
          std::array<double, 3> background);

  /// One optimization step at 1-based `iteration` on a fresh batch from `dataset`.
  /// Non-finite values abort with NumericError naming the iteration and ray range.
  StepStats step(const data::Dataset& dataset, std::size_t iteration);
  /// Same on a caller-provided batch.
  StepStats step_batch(const RayBatch& batch, std::size_t iteration);

  const TrainConfig& config() const { return config_; }

 private:
  const fields::AvatarModel<float>& model_;
  diff::ParamStore<float>& store_;
  TrainConfig config_;
  std::array<double, 3> background_;
  std::vector<diff::GradientSet<float>> grads_;
};

/// Training frames at every resolution the schedule uses.
struct TrainingData {
  std::map<std::size_t, data::Dataset> by_resolution;  // key: requested width (0 = native)
  const data::Dataset& at(std::size_t resolution) const;
};
TrainingData load_training_data(const std::string& manifest_path, const TrainConfig& config,
                                const std::string& split = "train");

struct LogRow {
  std::size_t iter = 0;
  double total = 0.0, photo = 0.0, reg = 0.0;
  double lr_grids = 0.0, lr_mlps = 0.0;
  double train_psnr = 0.0;
  double ms_per_iter = 0.0;
};

struct FitOptions {
  std::string log_path;      // CSV; empty disables
  std::string preview_dir;   // preview PNGs; empty disables
  std::size_t preview_frame = 0;
  std::size_t start_iter = 0;  // iterations already completed (resume)
  std::size_t stop_iter = 0;   // stop after this iteration (0 = total_iters)
  std::function<void(const StepStats&)> on_step;
};

struct FitResult {
  std::vector<StepStats> trace;  // every iteration run
  std::size_t final_iter = 0;
};

FitResult fit(const fields::AvatarModel<float>& model, diff::ParamStore<float>& store, const TrainingData& data,
              const TrainConfig& config, const FitOptions& options = {});

/// Mean ‖δx‖ over bin-center samples of `rays` rays drawn with `seed` (0 for no_decouple).
double mean_offset_norm(const fields::AvatarModel<float>& model, const diff::ParamStore<float>& store,
                        const data::Dataset& dataset, std::size_t rays, std::size_t samples_per_ray,
                        std::uint64_t seed);

/// Checks model/dataset compatibility (N, box) before training. Throws ContractError.
void check_compatible(const fields::ModelConfig& model, const data::Manifest& manifest);

}  // namespace movox::train
