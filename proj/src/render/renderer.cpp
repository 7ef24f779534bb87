// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/render/renderer.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "movox/error.hpp"
#include "movox/render/composite.hpp"
#include "movox/render/sampler.hpp"

namespace movox::render {

namespace {

void render_chunk(const Camera& camera, std::span<const double> theta, const SampleField& field,
                  const RenderSettings& s, std::size_t begin, std::size_t end, RenderOutput& out) {
  const std::size_t M = s.samples_per_ray;
  const std::array<double, 3>& bg = s.background;
  std::vector<Ray> rays;
  std::vector<std::size_t> pixels;
  for (std::size_t p = begin; p < end; ++p) {
    Ray ray = generate_ray(camera, static_cast<double>(p % camera.width), static_cast<double>(p / camera.width),
                           s.bounds);
    if (ray.empty) {
      for (int k = 0; k < 3; ++k) out.rgb.pixels[3 * p + k] = static_cast<float>(bg[k]);
      out.alpha.pixels[p] = 0.0f;
      continue;
    }
    rays.push_back(ray);
    pixels.push_back(p);
  }
  if (rays.empty()) return;

  const std::size_t R = rays.size();
  std::vector<double> points(R * M * 3), dirs(R * 3), deltas(R * M);
  for (std::size_t r = 0; r < R; ++r) {
    const Ray& ray = rays[r];
    const auto t = bin_centers(ray, M);
    const auto d = sample_deltas(t, ray.far);
    for (std::size_t i = 0; i < M; ++i) {
      for (int k = 0; k < 3; ++k) points[(r * M + i) * 3 + k] = ray.origin[k] + t[i] * ray.direction[k];
      deltas[r * M + i] = d[i];
    }
    for (int k = 0; k < 3; ++k) dirs[3 * r + k] = ray.direction[k];
  }
  std::vector<double> sigma(R * M), rgb(R * M * 3);
  field(FieldQuery{points, dirs, theta, M}, sigma, rgb);
  for (std::size_t r = 0; r < R; ++r) {
    const auto c = composite<double>(std::span<const double>(sigma).subspan(r * M, M),
                                     std::span<const double>(rgb).subspan(3 * r * M, 3 * M),
                                     std::span<const double>(deltas).subspan(r * M, M), bg);
    const std::size_t p = pixels[r];
    for (int k = 0; k < 3; ++k) out.rgb.pixels[3 * p + k] = static_cast<float>(c.rgb[k]);
    out.alpha.pixels[p] = static_cast<float>(c.alpha);
  }
}

}  // namespace

RenderOutput render_image(const Camera& camera, std::span<const double> theta, const SampleField& field,
                          const RenderSettings& settings) {
  camera.validate();
  if (settings.samples_per_ray == 0 || settings.chunk_rays == 0) {
    throw ContractError("render: samples_per_ray and chunk_rays must be positive");
  }
  RenderOutput out{Image(camera.width, camera.height, 3), Image(camera.width, camera.height, 1)};
  const std::size_t total = camera.width * camera.height;
  const std::size_t chunks = (total + settings.chunk_rays - 1) / settings.chunk_rays;
  const std::size_t workers = std::max<std::size_t>(1, std::min(settings.workers, chunks));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= chunks) return;
      try {
        render_chunk(camera, theta, field, settings, c * settings.chunk_rays,
                     std::min(total, (c + 1) * settings.chunk_rays), out);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = chunks;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

SampleField model_field(const fields::AvatarModel<float>& model, const diff::ParamStore<float>& store) {
  return [&model, &store](const FieldQuery& q, std::span<double> sigma, std::span<double> rgb) {
    const std::size_t M = q.samples_per_ray, R = q.directions.size() / 3, N = q.theta.size();
    fields::SampleBatch<float> batch;
    batch.samples_per_ray = M;
    batch.points = diff::Buffer<float>::matrix(R * M, 3);
    batch.directions = diff::Buffer<float>::matrix(R, 3);
    batch.theta = diff::Buffer<float>::matrix(R, N);
    for (std::size_t i = 0; i < R * M * 3; ++i) batch.points[i] = static_cast<float>(q.points[i]);
    for (std::size_t i = 0; i < R * 3; ++i) batch.directions[i] = static_cast<float>(q.directions[i]);
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t i = 0; i < N; ++i) batch.theta.at(r, i) = static_cast<float>(q.theta[i]);
    }
    diff::Tape<float> tape;
    const auto out = model.query(tape, store, batch);
    const auto& s = out.sigma.value();
    const auto& c = out.rgb.value();
    for (std::size_t i = 0; i < R * M; ++i) sigma[i] = s[i];
    for (std::size_t i = 0; i < R * M * 3; ++i) rgb[i] = c[i];
  };
}

}  // namespace movox::render
