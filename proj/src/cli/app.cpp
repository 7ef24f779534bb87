// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/cli/app.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "CLI11.hpp"

#include "movox/cli/gradcheck_suites.hpp"
#include "movox/data/dataset.hpp"
#include "movox/data/metrics.hpp"
#include "movox/data/png.hpp"
#include "movox/data/synthetic.hpp"
#include "movox/diff/tape.hpp"
#include "movox/error.hpp"
#include "movox/render/renderer.hpp"
#include "movox/train/checkpoint.hpp"
#include "movox/train/trainer.hpp"

namespace movox::cli {

namespace fs = std::filesystem;

namespace {

// Usage/validation problems detected before any output is written.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

int report(const char* kind, const std::string& message, int code) {
  std::cerr << "movox: error[" << kind << "]: " << one_line(message) << "\n";
  return code;
}

std::size_t default_workers() {
  if (const char* env = std::getenv("MOVOX_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("MOVOX_WORKERS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

std::string frame_file(const char* stem, std::size_t i, const char* suffix = "") {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03zu%s.png", stem, i, suffix);
  return buf;
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

// Options shared by several commands.
struct Common {
  std::string manifest;
  std::string checkpoint;
  std::string variant;
  std::string out;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> res;
  std::optional<std::size_t> iters;
  std::optional<double> lambda;
  std::optional<double> lr_grids;
  std::optional<double> lr_mlps;
  std::string scope;
  std::string split = "test";
  std::optional<std::size_t> frame;
  std::optional<std::size_t> rays;
  std::string corrupt;
};

std::size_t workers_of(const Common& c) { return c.workers ? *c.workers : default_workers(); }

struct LoadedModel {
  train::Checkpoint checkpoint;
  fields::AvatarModel<float> model;
};

LoadedModel load_model(const std::string& path) {
  if (path.empty()) throw UsageError("--checkpoint is required");
  if (!fs::exists(path)) throw UsageError("checkpoint '" + path + "' does not exist");
  train::Checkpoint ck;
  try {
    ck = train::load_checkpoint(path);
  } catch (const IoError& e) {
    throw UsageError(e.what());
  }
  auto model = fields::AvatarModel<float>::bind(ck.model, ck.store);
  return {std::move(ck), std::move(model)};
}

void require_n(const fields::ModelConfig& model, const data::Manifest& manifest) {
  if (model.expression_dims != manifest.expression_dims) {
    throw UsageError("checkpoint expects N = " + std::to_string(model.expression_dims) +
                     " expression coefficients but the manifest provides " + std::to_string(manifest.expression_dims));
  }
}

data::Dataset load_checked(const std::string& manifest, const data::LoadOptions& opts) {
  if (manifest.empty()) throw UsageError("--manifest is required");
  try {
    return data::load_dataset(manifest, opts);
  } catch (const IoError& e) {
    throw UsageError(e.what());
  }
}

render::RenderSettings settings_for(const data::Manifest& m, std::size_t samples, std::size_t workers) {
  render::RenderSettings s;
  s.samples_per_ray = samples;
  s.bounds = m.bounds();
  s.background = m.background;
  s.workers = workers;
  return s;
}

int cmd_synth(const Common& c) {
  if (c.out.empty()) throw UsageError("--out is required");
  data::SceneSpec spec = data::default_scene_spec(c.seed.value_or(7));
  try {
    if (!c.config.empty()) {
      nlohmann::json j = read_json_file(c.config);
      if (c.seed) j["seed"] = *c.seed;
      spec = data::scene_spec_from_json(j);
    }
    spec.validate();
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  const auto result = data::synth_generate(spec, c.out, workers_of(c));
  std::cout << "synth: " << result.frames << " frames (" << spec.train_frames << " train, " << spec.test_frames
            << " test), N = " << spec.expression_dims << ", " << spec.width << "x" << spec.height << "\n"
            << "manifest: " << result.manifest_path << "\n"
            << "sidecar: " << result.sidecar_path << "\n";
  return kExitOk;
}

train::RunConfig resolve_run_config(const Common& c) {
  train::RunConfig run;
  if (!c.config.empty()) run = train::run_config_from_json(read_json_file(c.config), run);
  if (!c.variant.empty()) run.model.variant = fields::parse_variant(c.variant);
  if (c.seed) run.train.seed = *c.seed;
  run.train.workers = workers_of(c);
  if (c.res) run.train.coarse_res = run.train.fine_res = *c.res;
  if (c.iters) {
    if (*c.iters == 0) throw UsageError("--iters must be positive");
    run.train.total_iters = *c.iters;
    run.train.coarse_iters = std::min(run.train.coarse_iters, *c.iters);
  }
  if (c.lambda) run.train.lambda = *c.lambda;
  if (c.lr_grids) run.train.lr_grids = *c.lr_grids;
  if (c.lr_mlps) run.train.lr_mlps = *c.lr_mlps;
  run.train.validate();
  return run;
}

int cmd_train(const Common& c) {
  if (c.out.empty()) throw UsageError("--out is required");
  if (c.manifest.empty()) throw UsageError("--manifest is required");
  train::RunConfig run;
  std::optional<train::Checkpoint> resume;
  try {
    run = resolve_run_config(c);
    if (!c.checkpoint.empty()) {
      LoadedModel lm = load_model(c.checkpoint);
      if (!c.variant.empty() && lm.checkpoint.model.variant != run.model.variant) {
        throw UsageError("--variant differs from the checkpoint's variant '" +
                         std::string(fields::to_string(lm.checkpoint.model.variant)) + "'");
      }
      run.model = lm.checkpoint.model;
      resume = std::move(lm.checkpoint);
    }
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }

  const data::Manifest manifest = [&] {
    try {
      return data::load_manifest(c.manifest);
    } catch (const IoError& e) {
      throw UsageError(e.what());
    }
  }();
  if (!resume) {
    run.model.expression_dims = manifest.expression_dims;
    run.model.domain = manifest.box;
  }
  train::TrainingData data;
  try {
    run.model.validate();
    train::check_compatible(run.model, manifest);
    data = train::load_training_data(c.manifest, run.train);
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  } catch (const IoError& e) {
    throw UsageError(e.what());
  }
  const std::size_t start = resume ? resume->iteration : 0;
  if (start >= run.train.total_iters) {
    throw UsageError("checkpoint is already at iteration " + std::to_string(start) + " of " +
                     std::to_string(run.train.total_iters));
  }

  fs::create_directories(c.out);
  diff::ParamStore<float> store;
  if (resume) store = std::move(resume->store);
  const auto model = resume ? fields::AvatarModel<float>::bind(run.model, store)
                            : fields::AvatarModel<float>::create(run.model, store, run.train.seed);
  train::FitOptions opts;
  opts.log_path = (fs::path(c.out) / "train_log.csv").string();
  opts.preview_dir = (fs::path(c.out) / "previews").string();
  opts.start_iter = start;
  opts.on_step = [&](const train::StepStats& s) {
    if (s.iteration % 100 == 0 || s.iteration == run.train.total_iters) {
      std::cout << "iter " << s.iteration << "  loss " << s.total << "  photo " << s.photo << "  reg " << s.reg
                << "  psnr " << s.batch_psnr << "  " << s.ms << " ms\n"
                << std::flush;
    }
  };
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = train::fit(model, store, data, run.train, opts);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const std::string ck = (fs::path(c.out) / "checkpoint.bin").string();
  train::save_checkpoint(ck, run.model, run.train, result.final_iter, store);
  std::cout << "train: variant " << fields::to_string(run.model.variant) << ", " << result.trace.size()
            << " iterations in " << seconds << " s\n"
            << "checkpoint: " << ck << "\n";
  return kExitOk;
}

int render_frames(const Common& c, bool reenact) {
  if (c.out.empty()) throw UsageError("--out is required");
  LoadedModel lm = load_model(c.checkpoint);
  data::LoadOptions opts;
  opts.load_images = false;
  opts.split = reenact ? "" : (c.split == "all" ? "" : c.split);
  if (c.res) opts.resolution = *c.res;
  const data::Dataset ds = load_checked(c.manifest, opts);
  require_n(lm.checkpoint.model, ds.manifest);
  if (c.frame && *c.frame >= ds.frames.size()) {
    throw UsageError("--frame " + std::to_string(*c.frame) + " out of range (" + std::to_string(ds.frames.size()) +
                     " frames)");
  }
  fs::create_directories(c.out);
  const auto settings = settings_for(ds.manifest, lm.checkpoint.train.samples_per_ray, workers_of(c));
  const auto field = render::model_field(lm.model, lm.checkpoint.store);
  std::size_t written = 0;
  for (std::size_t i = 0; i < ds.frames.size(); ++i) {
    if (c.frame && *c.frame != i) continue;
    const data::Frame& f = ds.frames[i];
    const auto img = render::render_image(f.camera, f.theta, field, settings);
    const char* stem = reenact ? "reenact" : "frame";
    data::write_png((fs::path(c.out) / frame_file(stem, f.index)).string(), img.rgb);
    data::write_png((fs::path(c.out) / frame_file(stem, f.index, "_alpha")).string(), img.alpha);
    ++written;
  }
  std::cout << (reenact ? "reenact: " : "render: ") << written << " frames written to " << c.out << "\n";
  return kExitOk;
}

int cmd_eval(const Common& c) {
  if (c.out.empty()) throw UsageError("--out is required");
  LoadedModel lm = load_model(c.checkpoint);
  data::LoadOptions opts;
  opts.split = c.split == "all" ? "" : c.split;
  const data::Dataset ds = load_checked(c.manifest, opts);
  require_n(lm.checkpoint.model, ds.manifest);
  fs::create_directories(c.out);
  const auto settings = settings_for(ds.manifest, lm.checkpoint.train.samples_per_ray, workers_of(c));
  const auto field = render::model_field(lm.model, lm.checkpoint.store);
  std::vector<data::FrameMetrics> rows;
  for (const data::Frame& f : ds.frames) {
    const auto img = render::render_image(f.camera, f.theta, field, settings);
    rows.push_back({f.index, data::metric_mse(img.rgb, f.rgb), data::metric_psnr(img.rgb, f.rgb),
                    data::metric_ssim(img.rgb, f.rgb)});
  }
  const auto summary = data::summarize(std::move(rows));
  const std::string csv = (fs::path(c.out) / "metrics.csv").string();
  data::write_metrics_csv(csv, summary);
  std::cout << "eval: " << summary.frames.size() << " frames  mse " << summary.mean_mse << "  psnr(pooled) "
            << summary.pooled_psnr << "  psnr(per-frame mean) " << summary.mean_psnr << "  ssim " << summary.mean_ssim
            << "\nmetrics: " << csv << "\n";
  return kExitOk;
}

int cmd_gradcheck(const Common& c) {
  if (c.scope.empty()) throw UsageError("--scope is required (ops, model or loss)");
  if (c.scope != "ops" && c.scope != "model" && c.scope != "loss") {
    throw UsageError("unknown --scope '" + c.scope + "' (expected ops, model or loss)");
  }
  if (!c.corrupt.empty()) diff::testing::set_backward_corruption(c.corrupt, 1.5);
  const std::uint64_t seed = c.seed.value_or(1);
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = c.scope == "ops" ? gradcheck_ops(seed) : c.scope == "model" ? gradcheck_model(seed)
                                                                                    : gradcheck_loss(seed);
  diff::testing::clear_backward_corruption();
  bool ok = true;
  std::printf("%-40s %14s %8s %9s  %s\n", "component", "max_rel_error", "probes", "rejected", "status");
  for (const auto& r : results) {
    std::printf("%-40s %14.3e %8zu %9zu  %s\n", r.component.c_str(), r.max_rel_error, r.probes, r.rejected,
                r.passed() ? "PASS" : "FAIL");
    ok = ok && r.passed();
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("gradcheck %s: %s (tolerance %.0e, >= %zu probes each, %.1f s)\n", c.scope.c_str(),
              ok ? "PASS" : "FAIL", kGradTolerance, kMinProbes, seconds);
  return ok ? kExitOk : kExitRuntime;
}

int cmd_bench(const Common& c) {
  const std::size_t iters = c.iters.value_or(50);
  if (iters == 0) throw UsageError("--iters must be positive");
  train::RunConfig run;
  try {
    run = resolve_run_config(c);
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  if (c.rays) run.train.rays_per_batch = *c.rays;
  run.model.validate();
  const std::size_t multi = std::max<std::size_t>(2, c.workers ? *c.workers : std::thread::hardware_concurrency());
  std::mt19937_64 rng(run.train.seed);
  // Random rays through the scene box stand in for a dataset batch.
  std::uniform_real_distribution<double> u(-1.0, 1.0), u01(0.0, 1.0);
  train::RayBatch batch;
  batch.samples_per_ray = run.train.samples_per_ray;
  const render::RayBounds bounds{0.1, 10.0, run.model.domain};
  while (batch.size() < run.train.rays_per_batch) {
    const render::Vec3 o{3.0 * u(rng), 3.0 * u(rng), 3.0};
    const render::Ray ray = render::make_ray(o, {0.5 * u(rng) - o[0], 0.5 * u(rng) - o[1], -o[2]}, bounds);
    if (ray.empty) continue;
    batch.rays.push_back(ray);
    batch.frame.push_back(0);
    batch.pixel.push_back(0);
    batch.target.push_back({static_cast<float>(u01(rng)), static_cast<float>(u01(rng)), static_cast<float>(u01(rng))});
    std::vector<double> theta(run.model.expression_dims);
    for (double& t : theta) t = u(rng);
    batch.theta.push_back(theta);
    for (std::size_t i = 0; i < batch.samples_per_ray; ++i) batch.jitter.push_back(u01(rng));
  }

  std::ostringstream csv;
  csv << "workers,iterations,rays_per_batch,samples_per_ray,median_ms_per_iter,rays_per_s,samples_per_s\n";
  std::cout << "bench: variant " << fields::to_string(run.model.variant) << ", " << run.train.rays_per_batch
            << " rays x " << run.train.samples_per_ray << " samples, N = " << run.model.expression_dims << ", "
            << iters << " iterations per row\n";
  double single_ms = 0.0;
  for (std::size_t workers : {std::size_t{1}, multi}) {
    diff::ParamStore<float> store;
    const auto model = fields::AvatarModel<float>::create(run.model, store, run.train.seed);
    train::TrainConfig tc = run.train;
    tc.workers = workers;
    train::Trainer trainer(model, store, tc, {1.0, 1.0, 1.0});
    std::vector<double> ms;
    for (std::size_t i = 1; i <= iters; ++i) ms.push_back(trainer.step_batch(batch, i).ms);
    std::nth_element(ms.begin(), ms.begin() + ms.size() / 2, ms.end());
    const double median = ms[ms.size() / 2];
    if (workers == 1) single_ms = median;
    const double rays_s = 1000.0 * static_cast<double>(batch.size()) / median;
    csv << workers << ',' << iters << ',' << batch.size() << ',' << batch.samples_per_ray << ',' << median << ','
        << rays_s << ',' << rays_s * static_cast<double>(batch.samples_per_ray) << '\n';
  }
  std::cout << csv.str();
  std::cout << "reference: 34 ms/iter reported for an RTX 3090 GPU (different hardware, not comparable); this host: "
            << single_ms << " ms/iter single-worker\n";
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    std::ofstream((fs::path(c.out) / "bench.csv").string()) << csv.str();
  }
  return kExitOk;
}

}  // namespace

void retain_heap() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 256 << 20);
#endif
}

int run(int argc, char** argv) {
  retain_heap();
  CLI::App app{"movox: motion-aware voxel radiance fields for expression-driven avatars"};
  app.require_subcommand(1);
  Common c;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", c.seed, "random seed");
    sub->add_option("--workers", c.workers, "worker threads (default: MOVOX_WORKERS or 1)")->check(CLI::PositiveNumber);
    sub->add_option("--out", c.out, "output directory");
  };
  auto add_train_overrides = [&](CLI::App* sub) {
    sub->add_option("--config", c.config, "JSON run config {\"model\": {...}, \"train\": {...}}; flags win");
    sub->add_option("--variant", c.variant, "full | no-decouple | mlp-deform");
    sub->add_option("--res", c.res, "training image width for both phases (0 = native)");
    sub->add_option("--iters", c.iters, "total iterations (the coarse phase is cut to fit)");
    sub->add_option("--lambda", c.lambda, "offset regularizer weight");
    sub->add_option("--lr-grids", c.lr_grids, "initial learning rate of the voxel grids");
    sub->add_option("--lr-mlps", c.lr_mlps, "initial learning rate of the MLPs");
  };

  auto* synth = app.add_subcommand("synth", "generate the synthetic dynamic scene");
  add_common(synth);
  synth->add_option("--config", c.config, "scene spec JSON (defaults if omitted)");

  auto* trn = app.add_subcommand("train", "fit a model to a dataset");
  add_common(trn);
  add_train_overrides(trn);
  trn->add_option("--manifest", c.manifest, "dataset manifest")->required();
  trn->add_option("--checkpoint", c.checkpoint, "resume from this checkpoint");

  auto* rnd = app.add_subcommand("render", "render frames of a manifest with a trained model");
  add_common(rnd);
  rnd->add_option("--checkpoint", c.checkpoint, "trained checkpoint")->required();
  rnd->add_option("--manifest", c.manifest, "cameras and expression coefficients")->required();
  rnd->add_option("--split", c.split, "train | test | all")->capture_default_str();
  rnd->add_option("--frame", c.frame, "render only this manifest frame");
  rnd->add_option("--res", c.res, "output width (0 = native)");

  auto* ree = app.add_subcommand("reenact", "drive a trained model with another sequence's poses and expressions");
  add_common(ree);
  ree->add_option("--checkpoint", c.checkpoint, "trained checkpoint")->required();
  ree->add_option("--manifest", c.manifest, "source manifest (images optional)")->required();
  ree->add_option("--res", c.res, "output width (0 = native)");

  auto* evl = app.add_subcommand("eval", "render a split and compute MSE / PSNR / SSIM");
  add_common(evl);
  evl->add_option("--checkpoint", c.checkpoint, "trained checkpoint")->required();
  evl->add_option("--manifest", c.manifest, "dataset manifest")->required();
  evl->add_option("--split", c.split, "train | test | all")->capture_default_str();

  auto* grc = app.add_subcommand("gradcheck", "compare analytic gradients with finite differences");
  grc->add_option("--scope", c.scope, "ops | model | loss");
  grc->add_option("--seed", c.seed, "random seed");
  grc->add_option("--corrupt", c.corrupt, "test hook: scale the backward pass of this op")->group("");

  auto* bch = app.add_subcommand("bench", "time training steps at the default batch shape");
  add_common(bch);
  add_train_overrides(bch);
  bch->add_option("--rays", c.rays, "rays per batch (default 4096)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e);
      return kExitOk;
    }
    return report("usage", e.what(), kExitUsage);
  }

  try {
    if (synth->parsed()) return cmd_synth(c);
    if (trn->parsed()) return cmd_train(c);
    if (rnd->parsed()) return render_frames(c, false);
    if (ree->parsed()) return render_frames(c, true);
    if (evl->parsed()) return cmd_eval(c);
    if (grc->parsed()) return cmd_gradcheck(c);
    if (bch->parsed()) return cmd_bench(c);
  } catch (const UsageError& e) {
    return report("usage", e.what(), kExitUsage);
  } catch (const ContractError& e) {
    return report("validation", e.what(), kExitUsage);
  } catch (const NumericError& e) {
    return report("numeric", e.what(), kExitRuntime);
  } catch (const std::exception& e) {
    return report("runtime", e.what(), kExitRuntime);
  }
  return kExitUsage;
}

}  // namespace movox::cli
