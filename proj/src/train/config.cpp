// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/train/config.hpp"

#include <cmath>

#include "movox/error.hpp"

namespace movox::train {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ContractError("train config: " + what); };
  if (rays_per_batch == 0) fail("rays_per_batch must be positive");
  if (samples_per_ray == 0) fail("samples_per_ray must be positive");
  if (total_iters == 0) fail("total_iters must be positive");
  if (coarse_iters > total_iters) fail("coarse_iters exceeds total_iters");
  if (!(lr_grids > 0.0) || !(lr_mlps > 0.0)) fail("learning rates must be positive");
  if (!(lr_drop_factor > 0.0 && lr_drop_factor <= 1.0)) fail("lr_drop_factor must lie in (0, 1]");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda must be finite and non-negative");
  if (workers == 0) fail("workers must be positive");
  if (chunk_rays == 0) fail("chunk_rays must be positive");
  if (log_every == 0) fail("log_every must be positive");
}

double TrainConfig::learning_rate(double base, std::size_t iter) const {
  double lr = base;
  for (std::size_t d : lr_drop_iters) {
    if (iter >= d) lr *= lr_drop_factor;
  }
  return lr;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"rays_per_batch", c.rays_per_batch}, {"samples_per_ray", c.samples_per_ray},
          {"total_iters", c.total_iters},       {"lr_grids", c.lr_grids},
          {"lr_mlps", c.lr_mlps},               {"lr_drop_iters", c.lr_drop_iters},
          {"lr_drop_factor", c.lr_drop_factor}, {"lambda", c.lambda},
          {"coarse_res", c.coarse_res},         {"coarse_iters", c.coarse_iters},
          {"fine_res", c.fine_res},             {"seed", c.seed},
          {"workers", c.workers},               {"chunk_rays", c.chunk_rays},
          {"preview_iters", c.preview_iters},   {"log_every", c.log_every}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  try {
    static const char* known[] = {"rays_per_batch", "samples_per_ray", "total_iters", "lr_grids",   "lr_mlps",
                                  "lr_drop_iters",  "lr_drop_factor",  "lambda",      "coarse_res", "coarse_iters",
                                  "fine_res",       "seed",            "workers",     "chunk_rays", "preview_iters",
                                  "log_every"};
    for (const auto& [key, value] : j.items()) {
      bool ok = false;
      for (const char* k : known) ok = ok || key == k;
      if (!ok) throw ContractError("train config: unknown key '" + key + "'");
      (void)value;
    }
    c.rays_per_batch = j.value("rays_per_batch", c.rays_per_batch);
    c.samples_per_ray = j.value("samples_per_ray", c.samples_per_ray);
    c.total_iters = j.value("total_iters", c.total_iters);
    c.lr_grids = j.value("lr_grids", c.lr_grids);
    c.lr_mlps = j.value("lr_mlps", c.lr_mlps);
    c.lr_drop_iters = j.value("lr_drop_iters", c.lr_drop_iters);
    c.lr_drop_factor = j.value("lr_drop_factor", c.lr_drop_factor);
    c.lambda = j.value("lambda", c.lambda);
    c.coarse_res = j.value("coarse_res", c.coarse_res);
    c.coarse_iters = j.value("coarse_iters", c.coarse_iters);
    c.fine_res = j.value("fine_res", c.fine_res);
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    c.chunk_rays = j.value("chunk_rays", c.chunk_rays);
    c.preview_iters = j.value("preview_iters", c.preview_iters);
    c.log_every = j.value("log_every", c.log_every);
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("train config: ") + e.what());
  }
  return c;
}

RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base) {
  if (j.contains("model")) {
    nlohmann::json merged = fields::to_json(base.model);
    merged.merge_patch(j.at("model"));
    try {
      base.model = fields::model_config_from_json(merged);
    } catch (const nlohmann::json::exception& e) {
      throw ContractError(std::string("model config: ") + e.what());
    }
  }
  if (j.contains("train")) base.train = train_config_from_json(j.at("train"), base.train);
  return base;
}

nlohmann::json to_json(const RunConfig& c) { return {{"model", fields::to_json(c.model)}, {"train", to_json(c.train)}}; }

}  // namespace movox::train
