// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/data/synthetic.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <thread>

#include "movox/data/png.hpp"
#include "movox/error.hpp"

namespace movox::data {

namespace fs = std::filesystem;

void SceneSpec::validate() const {
  auto fail = [](const std::string& what) { throw ContractError("scene spec: " + what); };
  if (expression_dims == 0) fail("expression_dims must be positive");
  if (blobs.empty()) fail("at least one blob is required");
  for (std::size_t j = 0; j < blobs.size(); ++j) {
    const Blob& b = blobs[j];
    if (!(b.radius > 0.0)) fail("blob " + std::to_string(j) + " has non-positive radius");
    if (!(b.peak >= 0.0)) fail("blob " + std::to_string(j) + " has negative peak density");
    for (double c : b.rgb) {
      if (!(c >= 0.0 && c <= 1.0)) fail("blob " + std::to_string(j) + " color outside [0, 1]");
    }
  }
  if (motion.size() != expression_dims) fail("motion must have one row per expression dimension");
  for (const auto& row : motion) {
    if (row.size() != blobs.size()) fail("each motion row needs one direction per blob");
  }
  if (!(falloff_inner > 0.0 && falloff_outer > falloff_inner)) fail("falloff must satisfy 0 < inner < outer");
  if (train_frames + test_frames == 0) fail("frame count must be positive");
  if (!(theta_range >= 0.0)) fail("theta_range must be non-negative");
  if (width == 0 || height == 0) fail("image size must be positive");
  if (!(focal > 0.0)) fail("focal must be positive");
  if (!(orbit_distance > 0.0)) fail("orbit_distance must be positive");
  if (oracle_samples == 0) fail("oracle_samples must be positive");
  if (!(near < far)) fail("near must be below far");
  if (!(box.edge > 0.0)) fail("box edge must be positive");
  if (!(probe_radius >= 0.0 && probe_radius < falloff_inner)) fail("probe_radius must lie inside the rigid core");
}

SceneSpec default_scene_spec(std::uint64_t seed) {
  SceneSpec s;
  s.seed = seed;
  s.blobs = {
      {{-0.36, 0.12, 0.0}, 0.28, 20.0, {0.85, 0.30, 0.25}, {0.20, 0.0, 0.0, 0.0, 0.25, 0.0, 0.0, 0.0, -0.2}},
      {{0.36, 0.16, 0.10}, 0.25, 20.0, {0.25, 0.70, 0.35}, {0.0, -0.25, 0.0, 0.20, 0.0, 0.0, 0.0, 0.0, 0.25}},
      {{0.0, -0.38, -0.10}, 0.30, 20.0, {0.30, 0.40, 0.90}, {0.0, 0.0, 0.25, -0.2, 0.0, 0.0, 0.25, 0.0, 0.0}},
  };
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.06, 0.06);
  s.motion.assign(s.expression_dims, std::vector<Vec3>(s.blobs.size()));
  for (auto& row : s.motion) {
    for (auto& d : row) d = {u(rng), u(rng), u(rng)};
  }
  return s;
}

nlohmann::json to_json(const SceneSpec& s) {
  nlohmann::json blobs = nlohmann::json::array();
  for (const Blob& b : s.blobs) {
    blobs.push_back({{"center", b.center}, {"radius", b.radius}, {"peak", b.peak}, {"rgb", b.rgb},
                     {"gradient", b.gradient}});
  }
  return {{"expression_dims", s.expression_dims},
          {"blobs", blobs},
          {"motion", s.motion},
          {"motion_scale", s.motion_scale},
          {"falloff_inner", s.falloff_inner},
          {"falloff_outer", s.falloff_outer},
          {"train_frames", s.train_frames},
          {"test_frames", s.test_frames},
          {"theta_range", s.theta_range},
          {"seed", s.seed},
          {"width", s.width},
          {"height", s.height},
          {"focal", s.focal},
          {"orbit_distance", s.orbit_distance},
          {"elevation_deg", s.elevation_deg},
          {"oracle_samples", s.oracle_samples},
          {"near", s.near},
          {"far", s.far},
          {"box", {{"min", s.box.min}, {"edge", s.box.edge}}},
          {"background", s.background},
          {"probes_per_blob", s.probes_per_blob},
          {"probe_radius", s.probe_radius}};
}

SceneSpec scene_spec_from_json(const nlohmann::json& j) {
  try {
    SceneSpec s = default_scene_spec(j.value("seed", std::uint64_t{7}));
    if (j.contains("blobs")) {
      s.blobs.clear();
      for (const auto& jb : j.at("blobs")) {
        Blob b;
        b.center = jb.at("center").get<Vec3>();
        b.radius = jb.at("radius").get<double>();
        b.peak = jb.value("peak", b.peak);
        b.rgb = jb.at("rgb").get<Vec3>();
        if (jb.contains("gradient")) b.gradient = jb.at("gradient").get<std::array<double, 9>>();
        s.blobs.push_back(b);
      }
    }
    s.expression_dims = j.value("expression_dims", s.expression_dims);
    if (j.contains("motion")) {
      s.motion = j.at("motion").get<std::vector<std::vector<Vec3>>>();
    } else if (s.motion.size() != s.expression_dims || (!s.motion.empty() && s.motion[0].size() != s.blobs.size())) {
      std::mt19937_64 rng(s.seed);
      std::uniform_real_distribution<double> u(-0.06, 0.06);
      s.motion.assign(s.expression_dims, std::vector<Vec3>(s.blobs.size()));
      for (auto& row : s.motion) {
        for (auto& d : row) d = {u(rng), u(rng), u(rng)};
      }
    }
    s.motion_scale = j.value("motion_scale", s.motion_scale);
    s.falloff_inner = j.value("falloff_inner", s.falloff_inner);
    s.falloff_outer = j.value("falloff_outer", s.falloff_outer);
    s.train_frames = j.value("train_frames", s.train_frames);
    s.test_frames = j.value("test_frames", s.test_frames);
    s.theta_range = j.value("theta_range", s.theta_range);
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.focal = j.value("focal", s.focal);
    s.orbit_distance = j.value("orbit_distance", s.orbit_distance);
    s.elevation_deg = j.value("elevation_deg", s.elevation_deg);
    s.oracle_samples = j.value("oracle_samples", s.oracle_samples);
    s.near = j.value("near", s.near);
    s.far = j.value("far", s.far);
    if (j.contains("box")) {
      s.box.min = j.at("box").at("min").get<Vec3>();
      s.box.edge = j.at("box").at("edge").get<double>();
    }
    if (j.contains("background")) s.background = j.at("background").get<std::array<double, 3>>();
    s.probes_per_blob = j.value("probes_per_blob", s.probes_per_blob);
    s.probe_radius = j.value("probe_radius", s.probe_radius);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("scene spec: ") + e.what());
  }
}

SyntheticScene::SyntheticScene(SceneSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

Vec3 SyntheticScene::offset(const Vec3& x, std::span<const double> theta) const {
  if (theta.size() != spec_.expression_dims) throw ContractError("synthetic scene: theta length mismatch");
  const std::size_t J = spec_.blobs.size();
  std::vector<double> w(J);
  double total = 0.0;
  for (std::size_t j = 0; j < J; ++j) {
    const Blob& b = spec_.blobs[j];
    const double d = std::hypot(x[0] - b.center[0], x[1] - b.center[1], x[2] - b.center[2]);
    const double t = std::clamp((d - spec_.falloff_inner * b.radius) /
                                    ((spec_.falloff_outer - spec_.falloff_inner) * b.radius),
                                0.0, 1.0);
    w[j] = 1.0 - t * t * (3.0 - 2.0 * t);
    total += w[j];
  }
  const double norm = std::max(1.0, total);
  Vec3 out{0, 0, 0};
  for (std::size_t j = 0; j < J; ++j) {
    if (w[j] == 0.0) continue;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double k = theta[i] * spec_.motion_scale * w[j] / norm;
      for (int a = 0; a < 3; ++a) out[a] += k * spec_.motion[i][j][a];
    }
  }
  return out;
}

double SyntheticScene::canonical_density(const Vec3& x) const {
  double s = 0.0;
  for (const Blob& b : spec_.blobs) {
    const double dx = x[0] - b.center[0], dy = x[1] - b.center[1], dz = x[2] - b.center[2];
    s += b.peak * std::exp(-3.0 * (dx * dx + dy * dy + dz * dz) / (b.radius * b.radius));
  }
  return s;
}

Vec3 SyntheticScene::canonical_color(const Vec3& x) const {
  Vec3 acc{0, 0, 0};
  double total = 0.0;
  for (const Blob& b : spec_.blobs) {
    const double q[3] = {(x[0] - b.center[0]) / b.radius, (x[1] - b.center[1]) / b.radius,
                         (x[2] - b.center[2]) / b.radius};
    const double s = b.peak * std::exp(-3.0 * (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]));
    for (int c = 0; c < 3; ++c) {
      const double v = b.rgb[c] + b.gradient[3 * c] * q[0] + b.gradient[3 * c + 1] * q[1] + b.gradient[3 * c + 2] * q[2];
      acc[c] += s * std::clamp(v, 0.0, 1.0);
    }
    total += s;
  }
  if (!(total > 1e-300)) return spec_.blobs.front().rgb;
  for (double& c : acc) c /= total;
  return acc;
}

void SyntheticScene::query(const Vec3& x, std::span<const double> theta, double& sigma, Vec3& rgb) const {
  const Vec3 d = offset(x, theta);
  const Vec3 xc{x[0] + d[0], x[1] + d[1], x[2] + d[2]};
  sigma = canonical_density(xc);
  rgb = canonical_color(xc);
}

Vec3 SyntheticScene::preimage(const Vec3& target, std::span<const double> theta) const {
  Vec3 x = target;
  for (int it = 0; it < 100; ++it) {
    const Vec3 d = offset(x, theta);
    const Vec3 next{target[0] - d[0], target[1] - d[1], target[2] - d[2]};
    const double step = std::hypot(next[0] - x[0], next[1] - x[1], next[2] - x[2]);
    x = next;
    if (step < 1e-14) break;
  }
  return x;
}

OracleImage oracle_render(const SyntheticScene& scene, const render::Camera& cam, std::span<const double> theta,
                          std::size_t samples) {
  const SceneSpec& s = scene.spec();
  OracleImage out{Image(cam.width, cam.height, 3), Image(cam.width, cam.height, 1)};
  const auto& R = cam.rotation;
  const Vec3 lo = s.box.min, hi = s.box.max();
  for (std::size_t py = 0; py < cam.height; ++py) {
    for (std::size_t px = 0; px < cam.width; ++px) {
      const double u = (static_cast<double>(px) + 0.5 - cam.cx) / cam.fx;
      const double v = (static_cast<double>(py) + 0.5 - cam.cy) / cam.fy;
      Vec3 d{R[0] * u + R[1] * v + R[2], R[3] * u + R[4] * v + R[5], R[6] * u + R[7] * v + R[8]};
      const double n = std::hypot(d[0], d[1], d[2]);
      for (double& c : d) c /= n;
      const Vec3& o = cam.translation;
      double t0 = s.near, t1 = s.far;
      for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-300) {
          if (o[a] < lo[a] || o[a] > hi[a]) t1 = -1.0;
          continue;
        }
        const double ta = (lo[a] - o[a]) / d[a], tb = (hi[a] - o[a]) / d[a];
        t0 = std::max(t0, std::min(ta, tb));
        t1 = std::min(t1, std::max(ta, tb));
      }
      double trans = 1.0;
      double col[3] = {0, 0, 0};
      if (t0 < t1) {
        const double dt = (t1 - t0) / static_cast<double>(samples);
        for (std::size_t i = 0; i < samples; ++i) {
          const double t = t0 + (static_cast<double>(i) + 0.5) * dt;
          double sigma;
          Vec3 rgb;
          scene.query({o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]}, theta, sigma, rgb);
          const double a = 1.0 - std::exp(-sigma * dt);
          for (int c = 0; c < 3; ++c) col[c] += trans * a * rgb[c];
          trans *= 1.0 - a;
        }
      }
      for (int c = 0; c < 3; ++c) out.rgb.at(px, py, c) = static_cast<float>(col[c] + trans * s.background[c]);
      out.alpha.at(px, py, 0) = static_cast<float>(1.0 - trans);
    }
  }
  return out;
}

nlohmann::json to_json(const Sidecar& s) {
  nlohmann::json frames = nlohmann::json::array();
  for (const ProbeFrame& f : s.frames) {
    nlohmann::json probes = nlohmann::json::array();
    for (const Probe& p : f.probes) probes.push_back({{"blob", p.blob}, {"point", p.point}, {"offset", p.offset}});
    frames.push_back({{"frame", f.frame}, {"split", f.split}, {"theta", f.theta}, {"probes", probes}});
  }
  return {{"version", 1}, {"scene", to_json(s.spec)}, {"alpha_images", s.alpha_images}, {"frames", frames}};
}

Sidecar load_sidecar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open sidecar '" + path + "'");
  try {
    nlohmann::json j;
    in >> j;
    Sidecar s;
    s.spec = scene_spec_from_json(j.at("scene"));
    s.alpha_images = j.value("alpha_images", std::vector<std::string>{});
    for (const auto& jf : j.at("frames")) {
      ProbeFrame f;
      f.frame = jf.at("frame").get<std::size_t>();
      f.split = jf.value("split", "train");
      f.theta = jf.at("theta").get<std::vector<double>>();
      for (const auto& jp : jf.at("probes")) {
        f.probes.push_back({jp.at("blob").get<std::size_t>(), jp.at("point").get<Vec3>(), jp.at("offset").get<Vec3>()});
      }
      s.frames.push_back(std::move(f));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed sidecar '" + path + "': " + e.what());
  }
}

namespace {

std::string frame_name(const char* dir, std::size_t i) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s/frame_%03zu.png", dir, i);
  return buf;
}

render::Camera orbit_camera(const SceneSpec& s, double azimuth, double elevation) {
  const Vec3 center{s.box.min[0] + 0.5 * s.box.edge, s.box.min[1] + 0.5 * s.box.edge, s.box.min[2] + 0.5 * s.box.edge};
  const Vec3 eye{center[0] + s.orbit_distance * std::cos(elevation) * std::sin(azimuth),
                 center[1] + s.orbit_distance * std::sin(elevation),
                 center[2] + s.orbit_distance * std::cos(elevation) * std::cos(azimuth)};
  render::Camera c = render::Camera::look_at(eye, center, {0, 1, 0}, s.focal, s.width, s.height);
  return c;
}

}  // namespace

SynthResult synth_generate(const SceneSpec& spec, const std::string& directory, std::size_t workers) {
  const SyntheticScene scene(spec);
  const std::size_t total = spec.train_frames + spec.test_frames;

  Manifest manifest;
  manifest.expression_dims = spec.expression_dims;
  manifest.box = spec.box;
  manifest.near = spec.near;
  manifest.far = spec.far;
  manifest.background = spec.background;
  Sidecar sidecar;
  sidecar.spec = spec;

  std::mt19937_64 rng(spec.seed);
  std::mt19937_64 probe_rng(spec.seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> theta_dist(-spec.theta_range, spec.theta_range);
  std::uniform_real_distribution<double> azimuth(-std::numbers::pi, std::numbers::pi);
  const double el = spec.elevation_deg * std::numbers::pi / 180.0;
  std::uniform_real_distribution<double> elevation(-el, el);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  for (std::size_t i = 0; i < total; ++i) {
    FrameSpec f;
    f.image = frame_name("images", i);
    f.split = i < spec.train_frames ? "train" : "test";
    f.theta.resize(spec.expression_dims);
    for (double& t : f.theta) t = theta_dist(rng);
    const double az = azimuth(rng);
    f.camera = orbit_camera(spec, az, elevation(rng));
    manifest.frames.push_back(f);
    sidecar.alpha_images.push_back(frame_name("alpha", i));

    ProbeFrame pf;
    pf.frame = i;
    pf.split = f.split;
    pf.theta = f.theta;
    for (std::size_t j = 0; j < spec.blobs.size(); ++j) {
      const Blob& b = spec.blobs[j];
      for (std::size_t k = 0; k < spec.probes_per_blob; ++k) {
        Vec3 o;
        do {
          o = {unit(probe_rng), unit(probe_rng), unit(probe_rng)};
        } while (o[0] * o[0] + o[1] * o[1] + o[2] * o[2] > 1.0);
        const double r = spec.probe_radius * b.radius;
        const Vec3 target{b.center[0] + r * o[0], b.center[1] + r * o[1], b.center[2] + r * o[2]};
        Probe p;
        p.blob = j;
        p.point = scene.preimage(target, f.theta);
        p.offset = scene.offset(p.point, f.theta);
        pf.probes.push_back(p);
      }
    }
    sidecar.frames.push_back(std::move(pf));
  }

  fs::create_directories(fs::path(directory) / "images");
  fs::create_directories(fs::path(directory) / "alpha");
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string error;
  auto work = [&] {
    for (std::size_t i; !failed && (i = next.fetch_add(1)) < total;) {
      try {
        const FrameSpec& f = manifest.frames[i];
        const OracleImage img = oracle_render(scene, f.camera, f.theta, spec.oracle_samples);
        write_png((fs::path(directory) / f.image).string(), img.rgb);
        write_png((fs::path(directory) / sidecar.alpha_images[i]).string(), img.alpha);
      } catch (const std::exception& e) {
        if (!failed.exchange(true)) error = e.what();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(workers, total));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failed) throw IoError("synthetic generation failed: " + error);

  SynthResult result;
  result.manifest_path = (fs::path(directory) / "manifest.json").string();
  result.sidecar_path = (fs::path(directory) / "sidecar.json").string();
  result.frames = total;
  save_manifest(manifest, result.manifest_path);
  std::ofstream side(result.sidecar_path);
  side << to_json(sidecar).dump(2) << "\n";
  if (!side) throw IoError("cannot write sidecar '" + result.sidecar_path + "'");
  return result;
}

}  // namespace movox::data
