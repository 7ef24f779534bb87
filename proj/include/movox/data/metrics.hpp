// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "movox/image.hpp"

namespace movox::data {

inline constexpr double kPsnrCap = 99.0;

/// Mean squared error over every pixel and channel. Throws ContractError on size mismatch.
double metric_mse(const Image& a, const Image& b);
/// −10·log10(MSE) for unit data range, capped at kPsnrCap.
double psnr_from_mse(double mse);
double metric_psnr(const Image& a, const Image& b);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;
};

/// Gaussian-window SSIM over the valid region, averaged over channels.
double metric_ssim(const Image& a, const Image& b, const SsimOptions& options = {});

struct FrameMetrics {
  std::size_t frame = 0;
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricsSummary {
  std::vector<FrameMetrics> frames;
  double mean_mse = 0.0;
  double mean_psnr = 0.0;    // per-frame PSNR, then averaged
  double pooled_psnr = 0.0;  // PSNR of the mean MSE
  double mean_ssim = 0.0;
};

/// Per-frame metrics plus both PSNR aggregates.
MetricsSummary summarize(std::vector<FrameMetrics> frames);

/// CSV: header, one row per frame, then "mean" and "pooled" rows.
void write_metrics_csv(const std::string& path, const MetricsSummary& summary);

}  // namespace movox::data
