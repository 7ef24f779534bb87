// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/render/sampler.hpp"

#include "movox/error.hpp"

namespace movox::render {

std::vector<double> stratified_from(const Ray& ray, std::span<const double> jitter) {
  if (jitter.empty()) throw ContractError("stratified sampling needs at least one sample");
  const double step = (ray.far - ray.near) / static_cast<double>(jitter.size());
  std::vector<double> t(jitter.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = ray.near + (static_cast<double>(i) + jitter[i]) * step;
  return t;
}

std::vector<double> stratified_sample(const Ray& ray, std::size_t M, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<double> jitter(M);
  for (double& u : jitter) u = u01(rng);
  return stratified_from(ray, jitter);
}

std::vector<double> bin_centers(const Ray& ray, std::size_t M) {
  return stratified_from(ray, std::vector<double>(M, 0.5));
}

std::vector<double> sample_deltas(std::span<const double> depths, double far) {
  std::vector<double> d(depths.size());
  for (std::size_t i = 0; i + 1 < depths.size(); ++i) d[i] = depths[i + 1] - depths[i];
  if (!depths.empty()) d.back() = far - depths.back();
  return d;
}

}  // namespace movox::render
