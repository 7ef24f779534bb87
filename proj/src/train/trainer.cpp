// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <thread>

#include "movox/data/metrics.hpp"
#include "movox/data/png.hpp"
#include "movox/diff/adam.hpp"
#include "movox/diff/ops.hpp"
#include "movox/error.hpp"
#include "movox/render/composite.hpp"
#include "movox/render/renderer.hpp"
#include "movox/render/sampler.hpp"
#include "movox/train/loss.hpp"

namespace movox::train {

namespace {

std::mt19937_64 iteration_rng(std::uint64_t seed, std::size_t iteration) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(iteration), static_cast<std::uint32_t>(iteration >> 32), 0x6d6f76u};
  return std::mt19937_64(seq);
}

}  // namespace

RayBatch draw_batch(const data::Dataset& dataset, std::size_t count, std::size_t samples_per_ray, std::uint64_t seed,
                    std::size_t iteration, bool jittered) {
  if (dataset.frames.empty()) throw ContractError("draw_batch: empty dataset");
  const render::RayBounds bounds = dataset.manifest.bounds();
  std::mt19937_64 rng = iteration_rng(seed, iteration);
  std::uniform_int_distribution<std::size_t> frame_dist(0, dataset.frames.size() - 1);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  RayBatch b;
  b.samples_per_ray = samples_per_ray;
  b.rays.reserve(count);
  b.jitter.reserve(count * samples_per_ray);
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t f = frame_dist(rng);
    const data::Frame& frame = dataset.frames[f];
    const std::size_t W = frame.camera.width, H = frame.camera.height;
    if (frame.rgb.width != W || frame.rgb.height != H) throw ContractError("draw_batch: frame images not loaded");
    const std::size_t p = std::uniform_int_distribution<std::size_t>(0, W * H - 1)(rng);
    b.rays.push_back(render::generate_ray(frame.camera, static_cast<double>(p % W), static_cast<double>(p / W), bounds));
    b.frame.push_back(f);
    b.pixel.push_back(p);
    b.target.push_back({frame.rgb.pixels[3 * p], frame.rgb.pixels[3 * p + 1], frame.rgb.pixels[3 * p + 2]});
    b.theta.push_back(frame.theta);
    for (std::size_t i = 0; i < samples_per_ray; ++i) b.jitter.push_back(jittered ? u01(rng) : 0.5);
  }
  return b;
}

template <typename Real>
LossTerms<Real> build_loss(diff::Tape<Real>& tape, const fields::AvatarModel<Real>& model,
                           const diff::ParamStore<Real>& store, const RayBatch& batch, std::size_t begin,
                           std::size_t end, double lambda, const std::array<double, 3>& background) {
  LossTerms<Real> terms;
  const std::size_t M = batch.samples_per_ray, N = model.config().expression_dims;
  std::vector<std::size_t> live;
  for (std::size_t r = begin; r < end; ++r) {
    if (!batch.rays[r].empty) {
      live.push_back(r);
      continue;
    }
    for (int c = 0; c < 3; ++c) {
      const double d = background[c] - batch.target[r][c];
      terms.empty_photo += std::abs(d);
      terms.squared_error += d * d;
    }
  }
  if (live.empty()) return terms;

  const std::size_t R = live.size();
  fields::SampleBatch<Real> sb;
  sb.samples_per_ray = M;
  sb.points = diff::Buffer<Real>::matrix(R * M, 3);
  sb.directions = diff::Buffer<Real>::matrix(R, 3);
  sb.theta = diff::Buffer<Real>::matrix(R, N);
  diff::Buffer<Real> deltas = diff::Buffer<Real>::matrix(R, M);
  diff::Buffer<Real> gt = diff::Buffer<Real>::matrix(R, 3);
  for (std::size_t k = 0; k < R; ++k) {
    const std::size_t r = live[k];
    const render::Ray& ray = batch.rays[r];
    const auto t = render::stratified_from(ray, std::span<const double>(batch.jitter).subspan(r * M, M));
    const auto dt = render::sample_deltas(t, ray.far);
    for (std::size_t i = 0; i < M; ++i) {
      for (int a = 0; a < 3; ++a) sb.points.at(k * M + i, a) = static_cast<Real>(ray.origin[a] + t[i] * ray.direction[a]);
      deltas.at(k, i) = static_cast<Real>(dt[i]);
    }
    for (int a = 0; a < 3; ++a) {
      sb.directions.at(k, a) = static_cast<Real>(ray.direction[a]);
      gt.at(k, a) = static_cast<Real>(batch.target[r][a]);
    }
    if (batch.theta[r].size() != N) throw ContractError("build_loss: theta length does not match the model");
    for (std::size_t i = 0; i < N; ++i) sb.theta.at(k, i) = static_cast<Real>(batch.theta[r][i]);
  }

  const auto out = model.query(tape, store, sb);
  const std::array<Real, 3> bg{static_cast<Real>(background[0]), static_cast<Real>(background[1]),
                               static_cast<Real>(background[2])};
  auto pixels = render::composite(out.sigma, out.rgb, deltas, bg);
  auto rgb = diff::slice_cols(pixels, 0, 3);
  terms.rendered = pixels;
  terms.photo = photometric_loss(rgb, tape.constant(gt));
  terms.total = terms.photo;
  if (out.offset) {
    terms.reg = offset_regularizer(*out.offset);
    terms.total = diff::add(*terms.photo, diff::scale(*terms.reg, static_cast<Real>(lambda)));
  }
  terms.samples = R * M;
  const auto& rv = rgb.value();
  for (std::size_t i = 0; i < rv.size(); ++i) {
    const double d = static_cast<double>(rv[i]) - static_cast<double>(gt[i]);
    terms.squared_error += d * d;
  }
  return terms;
}

template LossTerms<float> build_loss(diff::Tape<float>&, const fields::AvatarModel<float>&,
                                     const diff::ParamStore<float>&, const RayBatch&, std::size_t, std::size_t, double,
                                     const std::array<double, 3>&);
template LossTerms<double> build_loss(diff::Tape<double>&, const fields::AvatarModel<double>&,
                                      const diff::ParamStore<double>&, const RayBatch&, std::size_t, std::size_t,
                                      double, const std::array<double, 3>&);

Trainer::Trainer(const fields::AvatarModel<float>& model, diff::ParamStore<float>& store, TrainConfig config,
                 std::array<double, 3> background)
    : model_(model), store_(store), config_(std::move(config)), background_(background) {
  config_.validate();
}

StepStats Trainer::step(const data::Dataset& dataset, std::size_t iteration) {
  const RayBatch batch = draw_batch(dataset, config_.rays_per_batch, config_.samples_per_ray, config_.seed, iteration);
  return step_batch(batch, iteration);
}

StepStats Trainer::step_batch(const RayBatch& batch, std::size_t iteration) {
  const auto t0 = std::chrono::steady_clock::now();
  StepStats stats;
  stats.iteration = iteration;
  stats.lr_grids = config_.learning_rate(config_.lr_grids, iteration);
  stats.lr_mlps = config_.learning_rate(config_.lr_mlps, iteration);
  store_.set_learning_rate(diff::ParamGroup::grids, stats.lr_grids);
  store_.set_learning_rate(diff::ParamGroup::mlps, stats.lr_mlps);

  const std::size_t R = batch.size(), C = config_.chunk_rays;
  const std::size_t chunks = (R + C - 1) / C;
  const std::size_t W = std::max<std::size_t>(1, std::min(config_.workers, chunks));
  while (grads_.size() < W) grads_.emplace_back(store_);

  struct ChunkResult {
    double photo = 0.0, reg = 0.0, squared_error = 0.0;
    std::size_t samples = 0;
  };
  std::vector<ChunkResult> results(chunks);
  std::vector<std::exception_ptr> errors(W);

  auto run_worker = [&](std::size_t w) {
    grads_[w].zero();
    const std::size_t first = w * chunks / W, last = (w + 1) * chunks / W;
    for (std::size_t c = first; c < last; ++c) {
      const std::size_t begin = c * C, end = std::min(R, begin + C);
      try {
        diff::Tape<float> tape(grads_[w]);
        const auto terms = build_loss(tape, model_, store_, batch, begin, end, config_.lambda, background_);
        ChunkResult& res = results[c];
        res.photo = terms.empty_photo;
        res.squared_error = terms.squared_error;
        res.samples = terms.samples;
        if (terms.total) {
          res.photo += terms.photo->value()[0];
          if (terms.reg) res.reg = terms.reg->value()[0];
          tape.backward(*terms.total);
        }
      } catch (const NumericError& e) {
        errors[w] = std::make_exception_ptr(NumericError("iteration " + std::to_string(iteration) + ", rays " +
                                                         std::to_string(begin) + ".." + std::to_string(end - 1) +
                                                         ": " + e.what()));
        return;
      } catch (...) {
        errors[w] = std::current_exception();
        return;
      }
    }
  };
  if (W == 1) {
    run_worker(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < W; ++w) pool.emplace_back(run_worker, w);
    run_worker(0);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (std::size_t w = 1; w < W; ++w) grads_[0].accumulate(grads_[w]);

  double photo = 0.0, reg = 0.0, sq = 0.0;
  std::size_t samples = 0;
  for (const ChunkResult& r : results) {
    photo += r.photo;
    reg += r.reg;
    sq += r.squared_error;
    samples += r.samples;
  }
  stats.photo = photo;
  stats.reg = config_.lambda * reg;
  stats.total = stats.photo + stats.reg;
  stats.mean_offset = samples ? reg / static_cast<double>(samples) : 0.0;
  stats.batch_psnr = data::psnr_from_mse(sq / static_cast<double>(3 * std::max<std::size_t>(R, 1)));
  if (!std::isfinite(stats.total)) {
    throw NumericError("iteration " + std::to_string(iteration) + ": non-finite loss over rays 0.." +
                       std::to_string(R - 1));
  }
  diff::adam_step(store_, grads_[0]);
  stats.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return stats;
}

const data::Dataset& TrainingData::at(std::size_t resolution) const {
  const auto it = by_resolution.find(resolution);
  if (it == by_resolution.end()) throw ContractError("no training images loaded at width " + std::to_string(resolution));
  return it->second;
}

TrainingData load_training_data(const std::string& manifest_path, const TrainConfig& config,
                                const std::string& split) {
  TrainingData data;
  std::vector<std::size_t> needed;
  if (config.coarse_iters > 0) needed.push_back(config.coarse_res);
  if (config.coarse_iters < config.total_iters) needed.push_back(config.fine_res);
  for (std::size_t res : needed) {
    if (data.by_resolution.contains(res)) continue;
    data::LoadOptions opts;
    opts.split = split;
    opts.resolution = res;
    data.by_resolution.emplace(res, data::load_dataset(manifest_path, opts));
  }
  return data;
}

namespace {

void write_log_row(std::ofstream& out, const StepStats& s) {
  out << s.iteration << ',' << s.total << ',' << s.photo << ',' << s.reg << ',' << s.lr_grids << ',' << s.lr_mlps
      << ',' << s.batch_psnr << ',' << s.ms << '\n';
}

}  // namespace

FitResult fit(const fields::AvatarModel<float>& model, diff::ParamStore<float>& store, const TrainingData& data,
              const TrainConfig& config, const FitOptions& options) {
  config.validate();
  const std::size_t stop = options.stop_iter ? std::min(options.stop_iter, config.total_iters) : config.total_iters;
  const data::Dataset& first = data.at(config.resolution_at(options.start_iter + 1));
  check_compatible(model.config(), first.manifest);
  Trainer trainer(model, store, config, first.manifest.background);

  std::ofstream log;
  if (!options.log_path.empty()) {
    const bool append = options.start_iter > 0 && std::filesystem::exists(options.log_path);
    log.open(options.log_path, append ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("cannot write training log '" + options.log_path + "'");
    log << std::setprecision(9);
    if (!append) log << "iter,total,photo,reg,lr_grids,lr_mlps,train_psnr,ms_per_iter\n";
  }
  if (!options.preview_dir.empty()) std::filesystem::create_directories(options.preview_dir);

  FitResult result;
  for (std::size_t iter = options.start_iter + 1; iter <= stop; ++iter) {
    const data::Dataset& ds = data.at(config.resolution_at(iter));
    StepStats s = trainer.step(ds, iter);
    if (log.is_open() && (iter % config.log_every == 0 || iter == stop)) {
      write_log_row(log, s);
      log.flush();
    }
    if (!options.preview_dir.empty() &&
        std::find(config.preview_iters.begin(), config.preview_iters.end(), iter) != config.preview_iters.end()) {
      const data::Frame& frame = ds.frames.at(std::min(options.preview_frame, ds.frames.size() - 1));
      render::RenderSettings rs;
      rs.samples_per_ray = config.samples_per_ray;
      rs.bounds = ds.manifest.bounds();
      rs.background = ds.manifest.background;
      rs.workers = config.workers;
      const auto img = render::render_image(frame.camera, frame.theta, render::model_field(model, store), rs);
      char name[32];
      std::snprintf(name, sizeof name, "preview_%05zu.png", iter);
      data::write_png((std::filesystem::path(options.preview_dir) / name).string(), img.rgb);
    }
    if (options.on_step) options.on_step(s);
    result.trace.push_back(s);
    result.final_iter = iter;
  }
  return result;
}

double mean_offset_norm(const fields::AvatarModel<float>& model, const diff::ParamStore<float>& store,
                        const data::Dataset& dataset, std::size_t rays, std::size_t samples_per_ray,
                        std::uint64_t seed) {
  if (model.variant() == fields::Variant::no_decouple) return 0.0;
  const RayBatch batch = draw_batch(dataset, rays, samples_per_ray, seed, 0, false);
  const std::size_t M = samples_per_ray, N = model.config().expression_dims;
  double acc = 0.0;
  std::size_t count = 0;
  constexpr std::size_t chunk = 1024;
  for (std::size_t begin = 0; begin < batch.size(); begin += chunk) {
    const std::size_t end = std::min(batch.size(), begin + chunk);
    std::vector<std::size_t> live;
    for (std::size_t r = begin; r < end; ++r) {
      if (!batch.rays[r].empty) live.push_back(r);
    }
    if (live.empty()) continue;
    fields::SampleBatch<float> sb;
    sb.samples_per_ray = M;
    sb.points = diff::Buffer<float>::matrix(live.size() * M, 3);
    sb.directions = diff::Buffer<float>::matrix(live.size(), 3);
    sb.theta = diff::Buffer<float>::matrix(live.size(), N);
    for (std::size_t k = 0; k < live.size(); ++k) {
      const render::Ray& ray = batch.rays[live[k]];
      const auto t = render::bin_centers(ray, M);
      for (std::size_t i = 0; i < M; ++i) {
        for (int a = 0; a < 3; ++a) sb.points.at(k * M + i, a) = static_cast<float>(ray.origin[a] + t[i] * ray.direction[a]);
      }
      for (int a = 0; a < 3; ++a) sb.directions.at(k, a) = static_cast<float>(ray.direction[a]);
      for (std::size_t i = 0; i < N; ++i) sb.theta.at(k, i) = static_cast<float>(batch.theta[live[k]][i]);
    }
    diff::Tape<float> tape;
    const auto& d = model.deform(tape, store, sb).value();
    for (std::size_t i = 0; i < d.rows(); ++i) {
      acc += std::sqrt(static_cast<double>(d.at(i, 0)) * d.at(i, 0) + static_cast<double>(d.at(i, 1)) * d.at(i, 1) +
                       static_cast<double>(d.at(i, 2)) * d.at(i, 2));
    }
    count += d.rows();
  }
  return count ? acc / static_cast<double>(count) : 0.0;
}

void check_compatible(const fields::ModelConfig& model, const data::Manifest& manifest) {
  if (model.expression_dims != manifest.expression_dims) {
    throw ContractError("model expects N = " + std::to_string(model.expression_dims) + " expression coefficients, dataset has " +
                        std::to_string(manifest.expression_dims));
  }
  if (!(model.domain == manifest.box)) throw ContractError("model domain box differs from the dataset's scene box");
}

}  // namespace movox::train
