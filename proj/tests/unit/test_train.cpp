// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "movox/data/dataset.hpp"
#include "movox/data/synthetic.hpp"
#include "movox/diff/ops.hpp"
#include "movox/error.hpp"
#include "movox/fields/model.hpp"
#include "movox/train/checkpoint.hpp"
#include "movox/train/config.hpp"
#include "movox/train/loss.hpp"
#include "movox/train/trainer.hpp"

using namespace movox;
using namespace movox::diff;
using namespace movox::train;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "movox_test_train" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Buffer<double> rows3(std::vector<double> v) {
  const std::size_t n = v.size() / 3;
  return Buffer<double>(Shape{n, 3}, std::move(v));
}

// A 16×16, 3 + 2 frame synthetic dataset shared by the tests below.
const std::string& tiny_manifest() {
  static const std::string path = [] {
    data::SceneSpec s = data::default_scene_spec(5);
    s.train_frames = 3;
    s.test_frames = 2;
    s.width = s.height = 16;
    s.focal = 21.25;
    s.oracle_samples = 64;
    return data::synth_generate(s, scratch("scene").string(), 1).manifest_path;
  }();
  return path;
}

const data::Dataset& tiny_dataset() {
  static const data::Dataset ds = data::load_dataset(tiny_manifest(), {"train", 0, true});
  return ds;
}

fields::ModelConfig tiny_model(fields::Variant v = fields::Variant::full) {
  fields::ModelConfig m;
  m.variant = v;
  m.expression_dims = tiny_dataset().manifest.expression_dims;
  m.domain = tiny_dataset().manifest.box;
  m.scales = 2;
  m.appearance = {4, 8};
  m.motion = {2, 8};
  m.no_decouple = {4, 8};
  m.hidden = 16;
  m.deform_hidden = 16;
  m.deform_layers = 2;
  return m;
}

TrainConfig tiny_train() {
  TrainConfig t;
  t.rays_per_batch = 48;
  t.samples_per_ray = 8;
  t.total_iters = 6;
  t.lr_drop_iters = {3};
  t.coarse_res = t.fine_res = 0;
  t.coarse_iters = 0;
  t.chunk_rays = 16;
  t.preview_iters = {};
  t.log_every = 1;
  t.seed = 3;
  return t;
}

TrainingData tiny_training_data(const TrainConfig& t) { return load_training_data(tiny_manifest(), t); }

void perturb(ParamStore<double>& store, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (std::size_t i = 0; i < store.size(); ++i) {
    for (double& v : store[ParamId{i}].value.values()) v += u(rng);
  }
}

}  // namespace

TEST_CASE("photometric loss of identical images is zero") {
  Tape<double> tape;
  auto a = tape.constant(rows3({0.2, 0.4, 0.6, 0.1, 0.1, 0.9}));
  CHECK(photometric_loss(a, a).value()[0] == 0.0);
}

TEST_CASE("photometric loss of a (0.1, -0.2, 0.3) difference is 0.6 with sign gradients") {
  ParamStore<double> store;
  const ParamId p = store.add("rgb", ParamGroup::mlps, rows3({0.6, 0.3, 0.5}));
  GradientSet<double> grads(store);
  Tape<double> tape(grads);
  auto loss = photometric_loss(tape.parameter(store, p), tape.constant(rows3({0.5, 0.5, 0.2})));
  CHECK(loss.value()[0] == doctest::Approx(0.6).epsilon(1e-12));
  tape.backward(loss);
  CHECK(grads[p].values() == std::vector<double>{1.0, -1.0, 1.0});
}

TEST_CASE("float photometric loss matches a 64-bit reference sum") {
  std::mt19937_64 rng(42);
  std::vector<double> a(3 * 512), b(3 * 512);
  oracle::fill_random(a, rng, 0.0, 1.0);
  oracle::fill_random(b, rng, 0.0, 1.0);
  long double ref = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ref += std::fabs(static_cast<long double>(static_cast<float>(a[i])) - static_cast<float>(b[i]));
  }
  Tape<float> tape;
  auto fa = tape.constant(rows3(a).cast<float>());
  auto fb = tape.constant(rows3(b).cast<float>());
  const double got = photometric_loss(fa, fb).value()[0];
  CHECK(got == doctest::Approx(static_cast<double>(ref)).epsilon(1e-5));
}

TEST_CASE("offset regularizer sums row norms; gradient is the unit direction and zero at zero") {
  ParamStore<double> store;
  const ParamId p = store.add("dx", ParamGroup::mlps, rows3({3.0, 4.0, 0.0, 0.0, 0.0, 0.0}));
  GradientSet<double> grads(store);
  Tape<double> tape(grads);
  auto reg = offset_regularizer(tape.parameter(store, p));
  CHECK(reg.value()[0] == doctest::Approx(5.0));
  tape.backward(reg);
  const auto& g = grads[p].values();
  CHECK(g[0] == doctest::Approx(0.6));
  CHECK(g[1] == doctest::Approx(0.8));
  CHECK(g[2] == 0.0);
  for (std::size_t i = 3; i < 6; ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("total loss gradient equals photometric plus lambda times regularizer gradients") {
  ParamStore<double> store;
  const auto model = fields::AvatarModel<double>::create(tiny_model(), store, 1);
  perturb(store, 9);
  const RayBatch batch = draw_batch(tiny_dataset(), 12, 6, 4, 1);
  const double lambda = 0.25;
  const auto& bg = tiny_dataset().manifest.background;

  auto gradients = [&](int which, double& value) {
    GradientSet<double> g(store);
    Tape<double> tape(g);
    LossTerms<double> t = build_loss(tape, model, store, batch, 0, batch.size(), lambda, bg);
    REQUIRE(t.total.has_value());
    const Var<double> v = which == 0 ? *t.total : which == 1 ? *t.photo : *t.reg;
    value = v.value()[0];
    tape.backward(v);
    return g;
  };
  double total = 0, photo = 0, reg = 0;
  const auto gt = gradients(0, total);
  const auto gp = gradients(1, photo);
  const auto gr = gradients(2, reg);
  CHECK(reg > 0.0);
  CHECK(total == doctest::Approx(photo + lambda * reg).epsilon(1e-12));
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const ParamId id{i};
    for (std::size_t k = 0; k < gt[id].values().size(); ++k) {
      const double want = gp[id][k] + lambda * gr[id][k];
      worst = std::max(worst, std::fabs(gt[id][k] - want));
      scale = std::max(scale, std::fabs(want));
    }
  }
  CHECK(scale > 0.0);
  CHECK(worst <= 1e-10 * std::max(1.0, scale));
}

TEST_CASE("no-decouple variant has a zero regularizer") {
  ParamStore<double> store;
  const auto model = fields::AvatarModel<double>::create(tiny_model(fields::Variant::no_decouple), store, 1);
  const RayBatch batch = draw_batch(tiny_dataset(), 8, 4, 2, 1);
  Tape<double> tape;
  LossTerms<double> t =
      build_loss(tape, model, store, batch, 0, batch.size(), 0.5, tiny_dataset().manifest.background);
  REQUIRE(t.total.has_value());
  CHECK((!t.reg || t.reg->value()[0] == 0.0));
  CHECK(t.total->value()[0] == doctest::Approx(t.photo->value()[0]));
}

TEST_CASE("learning rate drops by a third at each drop iteration") {
  const TrainConfig c{};
  CHECK(c.learning_rate(1e-2, 1) == doctest::Approx(1e-2));
  CHECK(c.learning_rate(1e-2, 499) == doctest::Approx(1e-2));
  CHECK(c.learning_rate(1e-2, 500) == doctest::Approx(1e-2 / 3).epsilon(1e-12));
  CHECK(c.learning_rate(1e-2, 1999) == doctest::Approx(1e-2 / 3).epsilon(1e-12));
  CHECK(c.learning_rate(1e-2, 2000) == doctest::Approx(1e-2 / 9).epsilon(1e-12));
  CHECK(c.learning_rate(1e-3, 10000) == doctest::Approx(1e-3 / 9).epsilon(1e-12));
}

TEST_CASE("resolution schedule switches after the coarse phase") {
  const TrainConfig c{};
  CHECK(c.resolution_at(1) == 256);
  CHECK(c.resolution_at(6000) == 256);
  CHECK(c.resolution_at(6001) == 512);
}

TEST_CASE("train config validation and JSON") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.rays_per_batch = 0;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = TrainConfig{};
  c.samples_per_ray = 0;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = TrainConfig{};
  c.lr_grids = -1.0;
  CHECK_THROWS_AS(c.validate(), ContractError);

  const TrainConfig t = tiny_train();
  const TrainConfig back = train_config_from_json(to_json(t));
  CHECK(to_json(back) == to_json(t));
  CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"rays_per_bach", 10}}), ContractError);
  const TrainConfig partial = train_config_from_json(nlohmann::json{{"lambda", 0.5}});
  CHECK(partial.lambda == 0.5);
  CHECK(partial.rays_per_batch == TrainConfig{}.rays_per_batch);
}

TEST_CASE("batches depend only on seed and iteration") {
  const auto& ds = tiny_dataset();
  const RayBatch a = draw_batch(ds, 64, 8, 7, 12);
  const RayBatch b = draw_batch(ds, 64, 8, 7, 12);
  const RayBatch c = draw_batch(ds, 64, 8, 7, 13);
  CHECK(a.pixel == b.pixel);
  CHECK(a.frame == b.frame);
  CHECK(a.jitter == b.jitter);
  CHECK(a.pixel != c.pixel);
  CHECK(a.jitter.size() == 64 * 8);
  for (double j : a.jitter) {
    CHECK(j >= 0.0);
    CHECK(j < 1.0);
  }
  const RayBatch centers = draw_batch(ds, 16, 8, 7, 12, false);
  for (double j : centers.jitter) CHECK(j == 0.5);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.frame[i] < ds.frames.size());
    CHECK(a.pixel[i] < 16 * 16);
  }
}

TEST_CASE("checkpoint round trip is bit-identical") {
  const fs::path dir = scratch("ckpt");
  ParamStore<float> store;
  const auto mc = tiny_model();
  fields::AvatarModel<float>::create(mc, store, 5);
  store.moments(ParamId{0}).step = 17;
  store.moments(ParamId{0}).m[0] = 0.125f;
  save_checkpoint((dir / "a.bin").string(), mc, tiny_train(), 42, store);
  const Checkpoint ck = load_checkpoint((dir / "a.bin").string());
  CHECK(ck.iteration == 42);
  CHECK(ck.store.size() == store.size());
  CHECK(ck.store.moments(ParamId{0}).step == 17);
  for (std::size_t i = 0; i < store.size(); ++i) {
    CHECK(ck.store[ParamId{i}].name == store[ParamId{i}].name);
    CHECK(ck.store[ParamId{i}].value.values() == store[ParamId{i}].value.values());
  }
  save_checkpoint((dir / "b.bin").string(), ck.model, ck.train, ck.iteration, ck.store);
  CHECK(slurp(dir / "a.bin") == slurp(dir / "b.bin"));
  CHECK(to_json(ck.model) == to_json(mc));
}

TEST_CASE("truncated, foreign and missing checkpoints raise IoError") {
  const fs::path dir = scratch("ckpt_bad");
  ParamStore<float> store;
  fields::AvatarModel<float>::create(tiny_model(), store, 5);
  save_checkpoint((dir / "ok.bin").string(), tiny_model(), tiny_train(), 1, store);
  const std::string bytes = slurp(dir / "ok.bin");
  std::ofstream((dir / "short.bin").string(), std::ios::binary) << bytes.substr(0, bytes.size() - 7);
  std::ofstream((dir / "foreign.bin").string(), std::ios::binary) << "PNGXXXXX" << bytes.substr(8);
  std::ofstream((dir / "header.bin").string(), std::ios::binary) << bytes.substr(0, 30);
  CHECK_THROWS_AS(load_checkpoint((dir / "short.bin").string()), IoError);
  CHECK_THROWS_AS(load_checkpoint((dir / "foreign.bin").string()), IoError);
  CHECK_THROWS_AS(load_checkpoint((dir / "header.bin").string()), IoError);
  CHECK_THROWS_AS(load_checkpoint((dir / "absent.bin").string()), IoError);
}

TEST_CASE("same seed gives identical checkpoints; resume reproduces the uninterrupted run") {
  const fs::path dir = scratch("resume");
  const TrainConfig tc = tiny_train();
  const auto mc = tiny_model();
  const TrainingData data = tiny_training_data(tc);

  auto run_straight = [&](const fs::path& out) {
    ParamStore<float> store;
    const auto model = fields::AvatarModel<float>::create(mc, store, tc.seed);
    const FitResult r = fit(model, store, data, tc);
    save_checkpoint(out.string(), mc, tc, r.final_iter, store);
    return r;
  };
  const FitResult a = run_straight(dir / "a.bin");
  run_straight(dir / "b.bin");
  REQUIRE(a.trace.size() == 6);
  CHECK(a.final_iter == 6);
  CHECK(slurp(dir / "a.bin") == slurp(dir / "b.bin"));

  ParamStore<float> store;
  const auto model = fields::AvatarModel<float>::create(mc, store, tc.seed);
  FitOptions first;
  first.stop_iter = 3;
  const FitResult h1 = fit(model, store, data, tc, first);
  CHECK(h1.final_iter == 3);
  save_checkpoint((dir / "half.bin").string(), mc, tc, h1.final_iter, store);

  Checkpoint ck = load_checkpoint((dir / "half.bin").string());
  ParamStore<float> resumed = std::move(ck.store);
  const auto bound = fields::AvatarModel<float>::bind(ck.model, resumed);
  FitOptions second;
  second.start_iter = ck.iteration;
  const FitResult h2 = fit(bound, resumed, data, ck.train, second);
  REQUIRE(h2.trace.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(h1.trace[i].total == a.trace[i].total);
    CHECK(h2.trace[i].iteration == a.trace[i + 3].iteration);
    CHECK(h2.trace[i].total == a.trace[i + 3].total);
  }
  save_checkpoint((dir / "c.bin").string(), ck.model, ck.train, h2.final_iter, resumed);
  CHECK(slurp(dir / "a.bin") == slurp(dir / "c.bin"));
  CHECK(a.trace[3].lr_grids == doctest::Approx(tc.lr_grids / 3));
}

TEST_CASE("training lowers the photometric loss on the tiny scene") {
  TrainConfig tc = tiny_train();
  tc.total_iters = 40;
  tc.rays_per_batch = 128;
  const TrainingData data = tiny_training_data(tc);
  ParamStore<float> store;
  const auto model = fields::AvatarModel<float>::create(tiny_model(), store, 1);
  const FitResult r = fit(model, store, data, tc);
  double early = 0, late = 0;
  for (std::size_t i = 0; i < 5; ++i) early += r.trace[i].photo;
  for (std::size_t i = 35; i < 40; ++i) late += r.trace[i].photo;
  CHECK(late < 0.7 * early);
}

TEST_CASE("expression dimension mismatch is rejected before training") {
  fields::ModelConfig mc = tiny_model();
  CHECK_NOTHROW(check_compatible(mc, tiny_dataset().manifest));
  mc.expression_dims += 1;
  CHECK_THROWS_AS(check_compatible(mc, tiny_dataset().manifest), ContractError);
}
