// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "doctest.h"
#include "movox/data/dataset.hpp"
#include "movox/data/metrics.hpp"
#include "movox/data/png.hpp"
#include "movox/data/synthetic.hpp"
#include "movox/error.hpp"
#include "oracles.hpp"

using namespace movox;
using namespace movox::data;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("movox_test_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Image random_image(std::size_t w, std::size_t h, std::size_t c, std::mt19937_64& rng) {
  Image img(w, h, c);
  oracle::fill_random(img.pixels, rng, 0.0, 1.0);
  return img;
}

SceneSpec tiny_spec() {
  SceneSpec s = default_scene_spec(11);
  s.train_frames = 3;
  s.test_frames = 2;
  s.width = s.height = 16;
  s.focal = 21.25;
  s.oracle_samples = 256;
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Closed-form SSIM of two constant images: the variance terms cancel.
double constant_ssim(double a, double b, const SsimOptions& o) {
  const double c1 = (o.k1 * o.data_range) * (o.k1 * o.data_range);
  return (2 * a * b + c1) / (a * a + b * b + c1);
}

}  // namespace

TEST_CASE("identical images") {
  std::mt19937_64 rng(1);
  const Image a = random_image(20, 18, 3, rng);
  CHECK(metric_mse(a, a) == 0.0);
  CHECK(metric_psnr(a, a) == kPsnrCap);
  CHECK(metric_ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("PSNR of the reference table MSE") {
  CHECK(psnr_from_mse(0.0014) == doctest::Approx(28.5387).epsilon(1e-5));
  CHECK(psnr_from_mse(0.0) == 99.0);
  CHECK(psnr_from_mse(1e-12) == 99.0);
}

TEST_CASE("constant image against constant + 0.1") {
  const Image a(12, 12, 3, 0.5f), b(12, 12, 3, 0.6f);
  const double expected = oracle::mse(a, b);
  CHECK(expected == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(metric_mse(a, b) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(metric_psnr(a, b) == doctest::Approx(20.0).epsilon(1e-5));
  const SsimOptions o;
  CHECK(metric_ssim(a, b) == doctest::Approx(constant_ssim(0.5f, 0.6f, o)).epsilon(1e-9));
}

TEST_CASE("metrics are symmetric and vanish only on equality") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 10; ++i) {
    const Image a = random_image(16, 16, 3, rng), b = random_image(16, 16, 3, rng);
    CHECK(metric_psnr(a, b) == metric_psnr(b, a));
    CHECK(metric_ssim(a, b) == doctest::Approx(metric_ssim(b, a)).epsilon(1e-12));
    CHECK(metric_mse(a, b) == doctest::Approx(oracle::mse(a, b)).epsilon(1e-9));
    Image c = a;
    c.pixels[37] += 1e-3f;
    CHECK(metric_mse(a, c) > 0.0);
  }
}

TEST_CASE("SSIM drops with noise and mismatched sizes are rejected") {
  std::mt19937_64 rng(3);
  const Image a = random_image(32, 32, 3, rng);
  Image noisy = a;
  std::normal_distribution<float> n(0.0f, 0.1f);
  for (auto& v : noisy.pixels) v = std::clamp(v + n(rng), 0.0f, 1.0f);
  const double s = metric_ssim(a, noisy);
  CHECK(s < 0.95);
  CHECK(s > 0.0);
  const Image small(8, 8, 3);
  CHECK_THROWS_AS(metric_mse(a, small), ContractError);
  CHECK_THROWS_AS(metric_ssim(a, small), ContractError);
}

TEST_CASE("summary reports per-frame and pooled PSNR") {
  std::vector<FrameMetrics> frames{{0, 0.001, psnr_from_mse(0.001), 0.9}, {1, 0.0001, psnr_from_mse(0.0001), 0.8}};
  const auto s = summarize(frames);
  CHECK(s.mean_mse == doctest::Approx(0.00055));
  CHECK(s.mean_psnr == doctest::Approx(35.0));
  CHECK(s.pooled_psnr == doctest::Approx(psnr_from_mse(0.00055)));
  CHECK(s.pooled_psnr < s.mean_psnr);
  CHECK(s.mean_ssim == doctest::Approx(0.85));
  const fs::path dir = scratch("csv");
  write_metrics_csv((dir / "m.csv").string(), s);
  const std::string text = slurp(dir / "m.csv");
  CHECK(text.find("frame,mse,psnr,ssim") == 0);
  CHECK(text.find("\nmean,") != std::string::npos);
  CHECK(text.find("\npooled,") != std::string::npos);
}

TEST_CASE("PNG round trip quantizes to 8 bits") {
  std::mt19937_64 rng(4);
  const fs::path dir = scratch("png");
  for (std::size_t c : {1, 3, 4}) {
    const Image img = random_image(9, 7, c, rng);
    const std::string path = (dir / ("x" + std::to_string(c) + ".png")).string();
    write_png(path, img);
    const Image back = read_png(path);
    REQUIRE(back.same_size(img));
    for (std::size_t i = 0; i < img.pixels.size(); ++i) CHECK(back.pixels[i] == to_byte(img.pixels[i]) / 255.0f);
  }
  CHECK(to_byte(-1.0f) == 0);
  CHECK(to_byte(2.0f) == 255);
  CHECK(to_byte(0.5f) == 128);
  CHECK_THROWS_AS(read_png((dir / "missing.png").string()), IoError);
}

TEST_CASE("area downsampling") {
  const Image flat(8, 6, 3, 0.3f);
  const Image half = area_downsample(flat, 2);
  CHECK(half.width == 4);
  CHECK(half.height == 3);
  for (float v : half.pixels) CHECK(v == 0.3f);
  std::mt19937_64 rng(5);
  const Image img = random_image(8, 8, 3, rng);
  const Image d = area_downsample(img, 2);
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t x = 0; x < 4; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double mean = (static_cast<double>(img.at(2 * x, 2 * y, c)) + img.at(2 * x + 1, 2 * y, c) +
                             img.at(2 * x, 2 * y + 1, c) + img.at(2 * x + 1, 2 * y + 1, c)) / 4.0;
        CHECK(d.at(x, y, c) == doctest::Approx(mean).epsilon(1e-6));
      }
    }
  }
  CHECK_THROWS_AS(area_downsample(img, 3), ContractError);
}

TEST_CASE("mask compositing over the background") {
  Image img(2, 1, 3, 0.2f), mask(2, 1, 1);
  mask.pixels = {1.0f, 0.25f};
  const Image out = composite_mask(img, mask, {1.0, 0.0, 0.5});
  CHECK(out.at(0, 0, 0) == doctest::Approx(0.2));
  CHECK(out.at(1, 0, 0) == doctest::Approx(0.2 * 0.25 + 0.75));
  CHECK(out.at(1, 0, 1) == doctest::Approx(0.05));
  CHECK(out.at(1, 0, 2) == doctest::Approx(0.05 + 0.375));
}

TEST_CASE("manifest validation errors") {
  const fs::path dir = scratch("manifest");
  Manifest m;
  m.expression_dims = 2;
  save_manifest(m, (dir / "empty.json").string());
  try {
    load_dataset((dir / "empty.json").string());
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("empty dataset") != std::string::npos);
  }

  FrameSpec f;
  f.image = "nope.png";
  f.camera.fx = f.camera.fy = 10;
  f.camera.width = f.camera.height = 4;
  f.theta = {0.1, 0.2};
  m.frames = {f};
  save_manifest(m, (dir / "missing.json").string());
  CHECK_THROWS_AS(load_dataset((dir / "missing.json").string()), IoError);

  nlohmann::json j = to_json(m);
  j["frames"][0]["theta"] = {0.1};
  CHECK_THROWS_AS(manifest_from_json(j), IoError);
  j = to_json(m);
  j["frames"][0]["camera"]["rotation"] = {1, 0, 0, 0, 2, 0, 0, 0, 1};
  CHECK_THROWS_AS(manifest_from_json(j), IoError);
  j = to_json(m);
  j["version"] = 7;
  CHECK_THROWS_AS(manifest_from_json(j), IoError);
  CHECK_THROWS_AS(load_manifest((dir / "absent.json").string()), IoError);
}

TEST_CASE("synthetic offsets are linear in theta and vanish at theta = 0") {
  const SyntheticScene scene(default_scene_spec());
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const Vec3 x{U(rng), U(rng), U(rng)};
    std::vector<double> t1(4), t2(4), mix(4), zero(4, 0.0);
    for (auto& t : t1) t = U(rng);
    for (auto& t : t2) t = U(rng);
    const double a = U(rng), b = U(rng);
    for (int k = 0; k < 4; ++k) mix[k] = a * t1[k] + b * t2[k];
    const Vec3 d1 = scene.offset(x, t1), d2 = scene.offset(x, t2), dm = scene.offset(x, mix);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(dm[k] - (a * d1[k] + b * d2[k])) < 1e-12);
    CHECK(scene.offset(x, zero) == Vec3{0.0, 0.0, 0.0});
    double s0, s1;
    Vec3 c0, c1;
    scene.query(x, zero, s0, c0);
    CHECK(s0 == scene.canonical_density(x));
    CHECK(c0 == scene.canonical_color(x));
    scene.query(x, t1, s1, c1);
    CHECK(s1 >= 0.0);
  }
}

TEST_CASE("opposite expressions move an isolated blob symmetrically") {
  SceneSpec spec = default_scene_spec();
  spec.blobs.resize(1);
  for (auto& per_dim : spec.motion) per_dim.resize(1);
  const SyntheticScene scene(spec);
  const std::vector<double> theta{0.7, -0.3, 0.5, 0.9}, neg{-0.7, 0.3, -0.5, -0.9};
  for (const Blob& b : spec.blobs) {
    const Vec3 p = scene.preimage(b.center, theta), q = scene.preimage(b.center, neg);
    for (int a = 0; a < 3; ++a) CHECK(p[a] + q[a] == doctest::Approx(2 * b.center[a]).epsilon(1e-9));
    const Vec3 d = scene.offset(p, theta);
    for (int a = 0; a < 3; ++a) CHECK(p[a] + d[a] == doctest::Approx(b.center[a]).epsilon(1e-9));
  }
}

TEST_CASE("oracle quadrature has converged") {
  SceneSpec spec = default_scene_spec();
  spec.width = spec.height = 32;
  spec.focal = 42.5;
  const SyntheticScene scene(spec);
  const auto cam = render::Camera::look_at({0.5, 0.8, 3.0}, {0, 0, 0}, {0, 1, 0}, spec.focal, 32, 32);
  const std::vector<double> theta{0.2, 0.9, -0.4, -0.1};
  const auto a = oracle_render(scene, cam, theta, spec.oracle_samples);
  const auto b = oracle_render(scene, cam, theta, 2 * spec.oracle_samples);
  CHECK(metric_psnr(a.rgb, b.rgb) > 60.0);
  const auto zero = std::vector<double>(4, 0.0);
  double min_alpha = 1, max_alpha = 0;
  for (float v : oracle_render(scene, cam, zero, 256).alpha.pixels) {
    min_alpha = std::min<double>(min_alpha, v);
    max_alpha = std::max<double>(max_alpha, v);
  }
  CHECK(min_alpha < 1e-3);
  CHECK(max_alpha > 0.99);
}

TEST_CASE("scene spec validation and JSON round trip") {
  SceneSpec s = default_scene_spec(3);
  CHECK_NOTHROW(s.validate());
  const SceneSpec back = scene_spec_from_json(to_json(s));
  CHECK(to_json(back) == to_json(s));
  s.blobs[0].radius = -0.1;
  CHECK_THROWS_AS(s.validate(), ContractError);
  CHECK(default_scene_spec(3).motion != default_scene_spec(4).motion);
}

TEST_CASE("synthetic dataset generation, reload and determinism") {
  const SceneSpec spec = tiny_spec();
  const fs::path a = scratch("synth_a"), b = scratch("synth_b");
  const SynthResult r = synth_generate(spec, a.string(), 2);
  synth_generate(spec, b.string(), 1);
  CHECK(r.frames == 5);
  for (const char* name : {"manifest.json", "sidecar.json", "images/frame_000.png", "images/frame_004.png",
                           "alpha/frame_004.png"}) {
    CHECK(fs::exists(a / name));
    CHECK(slurp(a / name) == slurp(b / name));
  }

  // Save → load preserves θ and poses exactly.
  const Manifest m = load_manifest(r.manifest_path);
  REQUIRE(m.frames.size() == 5);
  save_manifest(m, (a / "copy.json").string());
  const Manifest c = load_manifest((a / "copy.json").string());
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(c.frames[i].theta == m.frames[i].theta);
    CHECK(c.frames[i].camera.rotation == m.frames[i].camera.rotation);
    CHECK(c.frames[i].camera.translation == m.frames[i].camera.translation);
  }

  const Dataset train = load_dataset(r.manifest_path, {"train", 0, true});
  const Dataset test = load_dataset(r.manifest_path, {"test", 0, true});
  CHECK(train.frames.size() == 3);
  CHECK(test.frames.size() == 2);
  CHECK(test.frames[0].index == 3);
  const Dataset half = load_dataset(r.manifest_path, {"train", 8, true});
  CHECK(half.frames[0].rgb.width == 8);
  CHECK(half.frames[0].camera.width == 8);
  CHECK(half.frames[0].rgb.at(0, 0, 0) ==
        doctest::Approx(area_downsample(train.frames[0].rgb, 2).at(0, 0, 0)).epsilon(1e-6));
  CHECK_THROWS_AS(load_dataset(r.manifest_path, {"train", 5, true}), IoError);

  // Written images agree with a fresh oracle render up to 8-bit quantization.
  const SyntheticScene scene(spec);
  for (const Frame& f : train.frames) {
    const auto o = oracle_render(scene, f.camera, f.theta, spec.oracle_samples);
    double worst = 0;
    for (std::size_t i = 0; i < o.rgb.pixels.size(); ++i) {
      worst = std::max<double>(worst, std::abs(o.rgb.pixels[i] - f.rgb.pixels[i]));
    }
    CHECK(worst <= 0.5 / 255.0 + 1e-6);
  }

  // Sidecar probes carry the analytic offset at their points.
  const Sidecar side = load_sidecar(r.sidecar_path);
  REQUIRE(side.frames.size() == 5);
  for (const auto& pf : side.frames) {
    CHECK(pf.probes.size() == spec.blobs.size() * spec.probes_per_blob);
    for (const auto& p : pf.probes) {
      const Vec3 d = scene.offset(p.point, pf.theta);
      for (int k = 0; k < 3; ++k) CHECK(d[k] == doctest::Approx(p.offset[k]).epsilon(1e-12));
      const Vec3 canon{p.point[0] + d[0], p.point[1] + d[1], p.point[2] + d[2]};
      const Blob& blob = spec.blobs[p.blob];
      const double r2 = std::pow(canon[0] - blob.center[0], 2) + std::pow(canon[1] - blob.center[1], 2) +
                        std::pow(canon[2] - blob.center[2], 2);
      CHECK(std::sqrt(r2) <= spec.probe_radius * blob.radius + 1e-9);
    }
  }
}

TEST_CASE("oracle renders score above 60 dB against the stored 8-bit frames") {
  const SceneSpec spec = tiny_spec();
  const fs::path dir = scratch("synth_eval");
  const SynthResult r = synth_generate(spec, dir.string(), 1);
  const Dataset ds = load_dataset(r.manifest_path);
  const SyntheticScene scene(spec);
  std::vector<FrameMetrics> rows;
  for (const Frame& f : ds.frames) {
    const auto o = oracle_render(scene, f.camera, f.theta, spec.oracle_samples);
    const double mse = metric_mse(o.rgb, f.rgb);
    rows.push_back({f.index, mse, psnr_from_mse(mse), metric_ssim(o.rgb, f.rgb)});
  }
  const auto s = summarize(rows);
  CHECK(s.pooled_psnr > 60.0);
  CHECK(s.mean_ssim > 0.999);
}
