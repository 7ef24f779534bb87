// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/render/composite.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "movox/error.hpp"

namespace movox::render {

namespace {

template <typename Real>
void check_sigma(Real s, std::size_t index) {
  if (!(s >= Real(0))) {
    throw ContractError("composite: density at sample " + std::to_string(index) + " is negative or NaN (" +
                        std::to_string(static_cast<double>(s)) + ")");
  }
}

// Forward pass of one ray; fills transmittances T_1..T_{M+1} when requested.
template <typename Real>
Composite<Real> composite_ray(const Real* sigma, const Real* rgb, const Real* deltas, std::size_t M,
                              const std::array<Real, 3>& bg, Real* weights, Real* trans) {
  double T = 1.0;
  double c[3] = {0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < M; ++i) {
    check_sigma(sigma[i], i);
    if (trans) trans[i] = static_cast<Real>(T);
    const double next = T * std::exp(-static_cast<double>(sigma[i]) * static_cast<double>(deltas[i]));
    const double w = T - next;
    if (weights) weights[i] = static_cast<Real>(w);
    for (int k = 0; k < 3; ++k) c[k] += w * static_cast<double>(rgb[3 * i + k]);
    T = next;
  }
  if (trans) trans[M] = static_cast<Real>(T);
  Composite<Real> out;
  for (int k = 0; k < 3; ++k) out.rgb[k] = static_cast<Real>(c[k] + T * static_cast<double>(bg[k]));
  out.transmittance = static_cast<Real>(T);
  out.alpha = static_cast<Real>(1.0 - T);
  return out;
}

}  // namespace

template <typename Real>
Composite<Real> composite(std::span<const Real> sigma, std::span<const Real> rgb, std::span<const Real> deltas,
                          std::array<Real, 3> background, std::span<Real> weights) {
  const std::size_t M = sigma.size();
  if (rgb.size() != 3 * M || deltas.size() != M || (!weights.empty() && weights.size() != M)) {
    throw ContractError("composite: sigma has " + std::to_string(M) + " samples but rgb has " +
                        std::to_string(rgb.size()) + " values and deltas " + std::to_string(deltas.size()));
  }
  return composite_ray<Real>(sigma.data(), rgb.data(), deltas.data(), M, background,
                       weights.empty() ? nullptr : weights.data(), static_cast<Real*>(nullptr));
}

template <typename Real>
diff::Var<Real> composite(diff::Var<Real> sigma, diff::Var<Real> rgb, const diff::Buffer<Real>& deltas,
                          std::array<Real, 3> background) {
  const std::size_t R = deltas.rows(), M = deltas.cols();
  if (sigma.value().size() != R * M || rgb.rows() != R * M || rgb.cols() != 3) {
    throw ShapeError("op 'composite': sigma " + diff::to_string(sigma.shape()) + ", rgb " +
                     diff::to_string(rgb.shape()) + ", deltas " + diff::to_string(deltas.shape()));
  }
  diff::Buffer<Real> out = diff::Buffer<Real>::matrix(R, 4);
  // Saved per sample: weight and transmittance (M + 1 per ray).
  std::vector<Real> weights(R * M), trans(R * (M + 1));
  const Real* s = sigma.value().data();
  const Real* c = rgb.value().data();
  for (std::size_t r = 0; r < R; ++r) {
    const auto res = composite_ray(s + r * M, c + 3 * r * M, deltas.data() + r * M, M, background,
                                   weights.data() + r * M, trans.data() + r * (M + 1));
    for (int k = 0; k < 3; ++k) out.at(r, k) = res.rgb[k];
    out.at(r, 3) = res.alpha;
  }
  diff::Tape<Real>& tape = *sigma.tape;
  return tape.record(
      "composite", std::move(out), {sigma.id, rgb.id},
      [sid = sigma.id, cid = rgb.id, deltas, background, weights = std::move(weights), trans = std::move(trans), R,
       M](diff::Tape<Real>& t, diff::NodeId self) {
        const diff::Buffer<Real>& g = t.grad(self);
        const Real* c = t.value(cid).data();
        const bool want_s = t.requires_grad(sid), want_c = t.requires_grad(cid);
        Real* gs = want_s ? t.grad(sid).data() : nullptr;
        Real* gc = want_c ? t.grad(cid).data() : nullptr;
        for (std::size_t r = 0; r < R; ++r) {
          const double gr[3] = {g.at(r, 0), g.at(r, 1), g.at(r, 2)};
          const double ga = g.at(r, 3);
          const Real* w = weights.data() + r * M;
          const Real* T = trans.data() + r * (M + 1);
          const Real* cr = c + 3 * r * M;
          const double Tend = T[M];
          // S_k = Σ_{i>k} w_i c_i + T_{M+1}·bg, built back to front.
          double S[3] = {Tend * background[0], Tend * background[1], Tend * background[2]};
          for (std::size_t k = M; k-- > 0;) {
            const std::size_t i = r * M + k;
            if (gc) {
              for (int q = 0; q < 3; ++q) gc[3 * i + q] += static_cast<Real>(gr[q] * w[k]);
            }
            if (gs) {
              double dtau = ga * Tend;
              for (int q = 0; q < 3; ++q) dtau += gr[q] * (static_cast<double>(T[k + 1]) * cr[3 * k + q] - S[q]);
              gs[i] += static_cast<Real>(dtau * deltas.at(r, k));
            }
            for (int q = 0; q < 3; ++q) S[q] += static_cast<double>(w[k]) * cr[3 * k + q];
          }
        }
      });
}

template Composite<float> composite(std::span<const float>, std::span<const float>, std::span<const float>,
                                    std::array<float, 3>, std::span<float>);
template Composite<double> composite(std::span<const double>, std::span<const double>, std::span<const double>,
                                     std::array<double, 3>, std::span<double>);
template diff::Var<float> composite(diff::Var<float>, diff::Var<float>, const diff::Buffer<float>&,
                                    std::array<float, 3>);
template diff::Var<double> composite(diff::Var<double>, diff::Var<double>, const diff::Buffer<double>&,
                                     std::array<double, 3>);

}  // namespace movox::render
