// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/grids/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace movox::grids {

namespace {

template <typename Real>
struct ScaleStencil {
  std::array<std::size_t, 8> offset;  // node index · C
  std::array<Real, 8> weight;
  AxisStencil<Real> axis[3];
};

template <typename Real>
ScaleStencil<Real> make_stencil(const GridGeometry& g, const LatticePoint<Real>& lp, std::size_t scale) {
  ScaleStencil<Real> st;
  const std::size_t L = g.resolution;
  for (std::size_t a = 0; a < 3; ++a) st.axis[a] = axis_stencil(lp, a, scale, L);
  std::size_t k = 0;
  for (int bz = 0; bz < 2; ++bz) {
    for (int by = 0; by < 2; ++by) {
      for (int bx = 0; bx < 2; ++bx, ++k) {
        st.weight[k] = st.axis[0].weight[bx] * st.axis[1].weight[by] * st.axis[2].weight[bz];
        st.offset[k] = g.node_index(st.axis[0].index[bx], st.axis[1].index[by], st.axis[2].index[bz]) * g.channels;
      }
    }
  }
  return st;
}

// d(weight of corner k)/du_axis.
template <typename Real>
Real corner_weight_derivative(const ScaleStencil<Real>& st, std::size_t k, std::size_t axis) {
  const int bits[3] = {static_cast<int>(k & 1), static_cast<int>((k >> 1) & 1), static_cast<int>((k >> 2) & 1)};
  Real d = bits[axis] ? st.axis[axis].dweight : -st.axis[axis].dweight;
  for (std::size_t a = 0; a < 3; ++a) {
    if (a != axis) d *= st.axis[a].weight[bits[a]];
  }
  return d;
}

template <typename Real>
void blend(const ScaleStencil<Real>& st, const Real* values, std::size_t C, Real factor, Real* out) {
  for (std::size_t c = 0; c < C; ++c) {
    Real acc = 0;
    for (std::size_t k = 0; k < 8; ++k) acc += st.weight[k] * values[st.offset[k] + c];
    out[c] = factor * acc;
  }
}

// Backpropagates one scale's output gradient `go` (C values) from factor·blend.
template <typename Real>
void blend_backward(const ScaleStencil<Real>& st, const Real* values, Real* value_grad, std::size_t C, Real factor,
                    const Real* go, std::array<Real, 3>* du_grad) {
  if (value_grad) {
    for (std::size_t k = 0; k < 8; ++k) {
      const Real w = factor * st.weight[k];
      Real* dst = value_grad + st.offset[k];
      for (std::size_t c = 0; c < C; ++c) dst[c] += w * go[c];
    }
  }
  if (du_grad) {
    for (std::size_t k = 0; k < 8; ++k) {
      Real dot = 0;
      for (std::size_t c = 0; c < C; ++c) dot += values[st.offset[k] + c] * go[c];
      if (dot == Real(0)) continue;
      for (std::size_t a = 0; a < 3; ++a) (*du_grad)[a] += factor * corner_weight_derivative(st, k, a) * dot;
    }
  }
}

template <typename Real>
void note_lattice_branch(diff::Tape<Real>& tape, std::size_t row, const LatticePoint<Real>& lp) {
  std::uint64_t key = row * 0x100000001b3ull;
  for (std::size_t a = 0; a < 3; ++a) key = key * 1315423911ull + lp.cell[a] * 2 + lp.inside[a];
  tape.note_branch(key);
}

template <typename Real>
std::span<const Real, 3> row3(const diff::Buffer<Real>& b, std::size_t r) {
  return std::span<const Real, 3>(b.data() + 3 * r, 3);
}

}  // namespace

void validate_scale_count(const GridGeometry& g, std::size_t K) {
  if (K < 1 || 2 * K > g.resolution) {
    throw ContractError("multi-distance sampling: K = " + std::to_string(K) + " outside [1, L/2] for L = " +
                        std::to_string(g.resolution));
  }
}

template <typename Real>
LatticePoint<Real> locate(const GridGeometry& g, std::span<const Real, 3> p) {
  LatticePoint<Real> lp;
  const Real inv_h = static_cast<Real>(1.0 / g.spacing());
  const Real top = static_cast<Real>(g.resolution - 1);
  const Real snap = Real(4) * std::numeric_limits<Real>::epsilon() * top;
  for (std::size_t a = 0; a < 3; ++a) {
    Real raw = (p[a] - static_cast<Real>(g.domain.min[a])) * inv_h;
    const Real nearest = std::round(raw);
    if (std::abs(raw - nearest) <= snap) raw = nearest;  // lattice nodes map to integers
    lp.inside[a] = raw > Real(0) && raw < top;
    lp.u[a] = std::clamp(raw, Real(0), top);
    lp.cell[a] = std::min(static_cast<std::size_t>(std::floor(lp.u[a])), g.resolution - 2);
  }
  return lp;
}

template <typename Real>
AxisStencil<Real> axis_stencil(const LatticePoint<Real>& lp, std::size_t axis, std::size_t scale, std::size_t L) {
  const long span = 2 * static_cast<long>(scale) - 1;
  const long lo = static_cast<long>(lp.cell[axis]) - (static_cast<long>(scale) - 1);
  const long top = static_cast<long>(L) - 1;
  const Real inv_span = Real(1) / static_cast<Real>(span);
  const Real f = (lp.u[axis] - static_cast<Real>(lo)) * inv_span;
  AxisStencil<Real> st;
  st.index[0] = static_cast<std::size_t>(std::clamp(lo, 0L, top));
  st.index[1] = static_cast<std::size_t>(std::clamp(lo + span, 0L, top));
  st.weight[0] = Real(1) - f;
  st.weight[1] = f;
  st.dweight = inv_span;
  return st;
}

template <typename Real>
std::vector<Real> multi_distance_sample(const VoxelGrid<Real>& grid, std::array<Real, 3> p, std::size_t K) {
  const GridGeometry& g = grid.geometry;
  validate_scale_count(g, K);
  const auto lp = locate<Real>(g, p);
  std::vector<Real> out(K * g.channels);
  for (std::size_t s = 1; s <= K; ++s) {
    blend(make_stencil(g, lp, s), grid.values.data(), g.channels, Real(1), out.data() + (s - 1) * g.channels);
  }
  return out;
}

template <typename Real>
std::vector<Real> trilinear_sample(const VoxelGrid<Real>& grid, std::array<Real, 3> p) {
  const GridGeometry& g = grid.geometry;
  std::vector<Real> out(g.channels);
  blend(make_stencil(g, locate<Real>(g, p), 1), grid.values.data(), g.channels, Real(1), out.data());
  return out;
}

template <typename Real>
std::vector<Real> mvg_sample(const MvgBases<Real>& bases, std::span<const Real> theta, std::array<Real, 3> p,
                             std::size_t K) {
  const GridGeometry& g = bases.geometry;
  if (theta.size() != bases.count()) {
    throw ContractError("mvg_sample: " + std::to_string(theta.size()) + " coefficients for " +
                        std::to_string(bases.count()) + " bases");
  }
  validate_scale_count(g, K);
  const std::size_t C = g.channels;
  const auto lp = locate<Real>(g, p);
  std::vector<Real> out(bases.count() * K * C);
  for (std::size_t s = 1; s <= K; ++s) {
    const auto st = make_stencil(g, lp, s);
    for (std::size_t i = 0; i < bases.count(); ++i) {
      blend(st, bases.bases[i].data(), C, theta[i], out.data() + (i * K + (s - 1)) * C);
    }
  }
  return out;
}

template <typename Real>
diff::Var<Real> sample_grid(const GridGeometry& g, diff::Var<Real> values, diff::Var<Real> points, std::size_t K) {
  validate_scale_count(g, K);
  if (values.value().size() != g.value_count()) {
    throw ShapeError("op 'sample_grid': grid buffer " + diff::to_string(values.shape()) + " vs geometry " +
                     diff::to_string(g.shape()));
  }
  if (points.cols() != 3) throw ShapeError("op 'sample_grid': points must be [B, 3], got " + diff::to_string(points.shape()));
  diff::Tape<Real>& tape = *points.tape;
  const std::size_t B = points.rows(), C = g.channels, width = K * C;
  const diff::Buffer<Real>& pv = points.value();
  const Real* vals = values.value().data();
  diff::Buffer<Real> out = diff::Buffer<Real>::matrix(B, width);
  for (std::size_t r = 0; r < B; ++r) {
    const auto lp = locate<Real>(g, row3(pv, r));
    if (tape.tracking_branches()) note_lattice_branch(tape, r, lp);
    for (std::size_t s = 1; s <= K; ++s) blend(make_stencil(g, lp, s), vals, C, Real(1), out.data() + r * width + (s - 1) * C);
  }
  return tape.record("sample_grid", std::move(out), {values.id, points.id},
                     [g, K, vid = values.id, pid = points.id](diff::Tape<Real>& t, diff::NodeId self) {
                       const std::size_t C = g.channels, width = K * C;
                       const diff::Buffer<Real>& pv = t.value(pid);
                       const diff::Buffer<Real>& gy = t.grad(self);
                       const Real* vals = t.value(vid).data();
                       Real* vgrad = t.requires_grad(vid) ? t.grad(vid).data() : nullptr;
                       Real* pgrad = t.requires_grad(pid) ? t.grad(pid).data() : nullptr;
                       const Real inv_h = static_cast<Real>(1.0 / g.spacing());
                       for (std::size_t r = 0; r < pv.rows(); ++r) {
                         const auto lp = locate<Real>(g, row3(pv, r));
                         std::array<Real, 3> du{};
                         for (std::size_t s = 1; s <= K; ++s) {
                           blend_backward(make_stencil(g, lp, s), vals, vgrad, C, Real(1),
                                          gy.data() + r * width + (s - 1) * C, pgrad ? &du : nullptr);
                         }
                         if (pgrad) {
                           for (std::size_t a = 0; a < 3; ++a) {
                             if (lp.inside[a]) pgrad[3 * r + a] += du[a] * inv_h;
                           }
                         }
                       }
                     });
}

template <typename Real>
diff::Var<Real> sample_mvg(const GridGeometry& g, std::span<const diff::Var<Real>> bases,
                           const diff::Buffer<Real>& theta, std::size_t samples_per_ray, diff::Var<Real> points,
                           std::size_t K) {
  validate_scale_count(g, K);
  const std::size_t N = bases.size(), C = g.channels, width = N * K * C;
  if (points.cols() != 3) throw ShapeError("op 'sample_mvg': points must be [B, 3], got " + diff::to_string(points.shape()));
  if (theta.cols() != N || theta.rows() * samples_per_ray != points.rows()) {
    throw ContractError("op 'sample_mvg': theta " + diff::to_string(theta.shape()) + " does not match " +
                        std::to_string(N) + " bases and " + std::to_string(points.rows()) + " points at " +
                        std::to_string(samples_per_ray) + " per ray");
  }
  std::vector<diff::NodeId> ids;
  std::vector<const Real*> vals;
  for (const auto& b : bases) {
    if (b.value().size() != g.value_count()) {
      throw ShapeError("op 'sample_mvg': basis buffer " + diff::to_string(b.shape()) + " vs geometry " +
                       diff::to_string(g.shape()));
    }
    ids.push_back(b.id);
    vals.push_back(b.value().data());
  }
  ids.push_back(points.id);

  diff::Tape<Real>& tape = *points.tape;
  const std::size_t B = points.rows();
  const diff::Buffer<Real>& pv = points.value();
  diff::Buffer<Real> out = diff::Buffer<Real>::matrix(B, width);
  for (std::size_t r = 0; r < B; ++r) {
    const Real* th = theta.data() + (r / samples_per_ray) * N;
    const auto lp = locate<Real>(g, row3(pv, r));
    if (tape.tracking_branches()) note_lattice_branch(tape, r, lp);
    for (std::size_t s = 1; s <= K; ++s) {
      const auto st = make_stencil(g, lp, s);
      for (std::size_t i = 0; i < N; ++i) blend(st, vals[i], C, th[i], out.data() + r * width + (i * K + s - 1) * C);
    }
  }
  return tape.record(
      "sample_mvg", std::move(out), ids,
      [g, K, N, samples_per_ray, theta, ids](diff::Tape<Real>& t, diff::NodeId self) {
        const std::size_t C = g.channels, width = N * K * C;
        const diff::NodeId pid = ids.back();
        const diff::Buffer<Real>& pv = t.value(pid);
        const diff::Buffer<Real>& gy = t.grad(self);
        std::vector<const Real*> vals(N);
        std::vector<Real*> vgrad(N, nullptr);
        for (std::size_t i = 0; i < N; ++i) {
          vals[i] = t.value(ids[i]).data();
          if (t.requires_grad(ids[i])) vgrad[i] = t.grad(ids[i]).data();
        }
        Real* pgrad = t.requires_grad(pid) ? t.grad(pid).data() : nullptr;
        const Real inv_h = static_cast<Real>(1.0 / g.spacing());
        for (std::size_t r = 0; r < pv.rows(); ++r) {
          const Real* th = theta.data() + (r / samples_per_ray) * N;
          const auto lp = locate<Real>(g, row3(pv, r));
          std::array<Real, 3> du{};
          for (std::size_t s = 1; s <= K; ++s) {
            const auto st = make_stencil(g, lp, s);
            for (std::size_t i = 0; i < N; ++i) {
              if (th[i] == Real(0)) continue;
              blend_backward(st, vals[i], vgrad[i], C, th[i], gy.data() + r * width + (i * K + s - 1) * C,
                             pgrad ? &du : nullptr);
            }
          }
          if (pgrad) {
            for (std::size_t a = 0; a < 3; ++a) {
              if (lp.inside[a]) pgrad[3 * r + a] += du[a] * inv_h;
            }
          }
        }
      });
}

#define MOVOX_INSTANTIATE_SAMPLING(Real)                                                                          \
  template LatticePoint<Real> locate<Real>(const GridGeometry&, std::span<const Real, 3>);                       \
  template AxisStencil<Real> axis_stencil<Real>(const LatticePoint<Real>&, std::size_t, std::size_t, std::size_t); \
  template std::vector<Real> trilinear_sample<Real>(const VoxelGrid<Real>&, std::array<Real, 3>);                \
  template std::vector<Real> multi_distance_sample<Real>(const VoxelGrid<Real>&, std::array<Real, 3>, std::size_t); \
  template std::vector<Real> mvg_sample<Real>(const MvgBases<Real>&, std::span<const Real>, std::array<Real, 3>,   \
                                              std::size_t);                                                       \
  template diff::Var<Real> sample_grid<Real>(const GridGeometry&, diff::Var<Real>, diff::Var<Real>, std::size_t); \
  template diff::Var<Real> sample_mvg<Real>(const GridGeometry&, std::span<const diff::Var<Real>>,               \
                                            const diff::Buffer<Real>&, std::size_t, diff::Var<Real>, std::size_t);

MOVOX_INSTANTIATE_SAMPLING(float)
MOVOX_INSTANTIATE_SAMPLING(double)

#undef MOVOX_INSTANTIATE_SAMPLING

}  // namespace movox::grids
