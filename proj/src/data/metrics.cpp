// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/data/metrics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "movox/error.hpp"

namespace movox::data {

namespace {

void require_same(const Image& a, const Image& b, const char* what) {
  if (!a.same_size(b)) {
    throw ContractError(std::string(what) + ": image sizes differ (" + std::to_string(a.width) + "x" +
                        std::to_string(a.height) + "x" + std::to_string(a.channels) + " vs " +
                        std::to_string(b.width) + "x" + std::to_string(b.height) + "x" + std::to_string(b.channels) +
                        ")");
  }
  if (a.pixels.empty()) throw ContractError(std::string(what) + ": empty images");
}

}  // namespace

double metric_mse(const Image& a, const Image& b) {
  require_same(a, b, "mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.pixels.size());
}

double psnr_from_mse(double mse) {
  if (!(mse > 0.0)) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

double metric_psnr(const Image& a, const Image& b) { return psnr_from_mse(metric_mse(a, b)); }

double metric_ssim(const Image& a, const Image& b, const SsimOptions& o) {
  require_same(a, b, "ssim");
  const int w = o.window, half = w / 2;
  if (a.width < static_cast<std::size_t>(w) || a.height < static_cast<std::size_t>(w)) {
    throw ContractError("ssim: images smaller than the " + std::to_string(w) + "x" + std::to_string(w) + " window");
  }
  std::vector<double> g(w);
  double gs = 0.0;
  for (int i = 0; i < w; ++i) {
    g[i] = std::exp(-0.5 * (i - half) * (i - half) / (o.sigma * o.sigma));
    gs += g[i];
  }
  for (double& v : g) v /= gs;
  const double c1 = (o.k1 * o.data_range) * (o.k1 * o.data_range);
  const double c2 = (o.k2 * o.data_range) * (o.k2 * o.data_range);
  const std::size_t W = a.width, H = a.height, C = a.channels;
  const std::size_t ow = W - w + 1, oh = H - w + 1;

  double total = 0.0;
  std::vector<double> plane[5], tmp[5];
  for (std::size_t c = 0; c < C; ++c) {
    for (auto& p : plane) p.assign(W * H, 0.0);
    for (std::size_t i = 0; i < W * H; ++i) {
      const double x = a.pixels[i * C + c], y = b.pixels[i * C + c];
      plane[0][i] = x;
      plane[1][i] = y;
      plane[2][i] = x * x;
      plane[3][i] = y * y;
      plane[4][i] = x * y;
    }
    // Separable filtering: rows, then columns, valid region only.
    for (int k = 0; k < 5; ++k) {
      tmp[k].assign(ow * H, 0.0);
      for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
          double s = 0.0;
          for (int i = 0; i < w; ++i) s += g[i] * plane[k][y * W + x + i];
          tmp[k][y * ow + x] = s;
        }
      }
    }
    double acc = 0.0;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        double f[5];
        for (int k = 0; k < 5; ++k) {
          double s = 0.0;
          for (int i = 0; i < w; ++i) s += g[i] * tmp[k][(y + i) * ow + x];
          f[k] = s;
        }
        const double mx = f[0], my = f[1];
        const double vx = f[2] - mx * mx, vy = f[3] - my * my, cxy = f[4] - mx * my;
        acc += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      }
    }
    total += acc / static_cast<double>(ow * oh);
  }
  return total / static_cast<double>(C);
}

MetricsSummary summarize(std::vector<FrameMetrics> frames) {
  MetricsSummary s;
  s.frames = std::move(frames);
  if (s.frames.empty()) return s;
  for (const auto& f : s.frames) {
    s.mean_mse += f.mse;
    s.mean_psnr += f.psnr;
    s.mean_ssim += f.ssim;
  }
  const double n = static_cast<double>(s.frames.size());
  s.mean_mse /= n;
  s.mean_psnr /= n;
  s.mean_ssim /= n;
  s.pooled_psnr = psnr_from_mse(s.mean_mse);
  return s;
}

void write_metrics_csv(const std::string& path, const MetricsSummary& s) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write metrics CSV '" + path + "'");
  out << std::setprecision(10);
  out << "frame,mse,psnr,ssim\n";
  for (const auto& f : s.frames) out << f.frame << ',' << f.mse << ',' << f.psnr << ',' << f.ssim << '\n';
  out << "mean," << s.mean_mse << ',' << s.mean_psnr << ',' << s.mean_ssim << '\n';
  out << "pooled," << s.mean_mse << ',' << s.pooled_psnr << ',' << s.mean_ssim << '\n';
  if (!out) throw IoError("failed writing metrics CSV '" + path + "'");
}

}  // namespace movox::data
