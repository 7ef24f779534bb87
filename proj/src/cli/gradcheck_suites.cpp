// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/cli/gradcheck_suites.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "movox/diff/gradcheck.hpp"
#include "movox/diff/ops.hpp"
#include "movox/fields/model.hpp"
#include "movox/fields/positional_encoding.hpp"
#include "movox/grids/sampling.hpp"
#include "movox/render/composite.hpp"
#include "movox/train/loss.hpp"
#include "movox/train/trainer.hpp"

namespace movox::cli {

namespace {

using diff::Buffer;
using diff::Shape;
using diff::Tape;
using diff::Var;
using Leaves = std::vector<Var<double>>;
using Body = std::function<Var<double>(Tape<double>&, const Leaves&)>;

struct Leaf {
  Shape shape;
  double lo = -1.0, hi = 1.0;
};

// f(x): x fills the leaves in order; body builds a scalar on a float64 tape.
diff::ScalarFunction tape_function(const std::vector<Leaf>& leaves, Body body) {
  return [leaves, body](std::span<const double> x, std::span<double> grad) {
    diff::ParamStore<double> store;
    std::size_t at = 0;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      Buffer<double> b(leaves[i].shape);
      std::copy(x.begin() + at, x.begin() + at + b.size(), b.data());
      at += b.size();
      store.add("leaf" + std::to_string(i), diff::ParamGroup::mlps, std::move(b));
    }
    diff::GradientSet<double> grads(store);
    Tape<double> tape(grads);
    tape.set_branch_tracking(true);
    Leaves vars;
    for (std::size_t i = 0; i < leaves.size(); ++i) vars.push_back(tape.parameter(store, diff::ParamId{i}));
    const Var<double> loss = body(tape, vars);
    const double value = loss.value()[0];
    if (!grad.empty()) {
      tape.backward(loss);
      std::size_t k = 0;
      for (std::size_t i = 0; i < leaves.size(); ++i) {
        for (double g : grads[diff::ParamId{i}].span()) grad[k++] = g;
      }
    }
    return diff::Evaluation{value, tape.branch_signature()};
  };
}

Buffer<double> random_buffer(Shape shape, double lo, double hi, std::mt19937_64& rng) {
  Buffer<double> b(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : b.span()) v = u(rng);
  return b;
}

// Σ out ⊙ W with a fixed random W, so every output element carries a distinct weight.
Var<double> project(Tape<double>& tape, Var<double> out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return diff::sum(diff::mul(out, tape.constant(random_buffer(out.shape(), -1.0, 1.0, rng))));
}

// Repeats fresh random instances until at least kMinProbes coordinates were compared.
ComponentResult run_component(const std::string& name, const std::vector<Leaf>& leaves,
                              const std::function<Body(std::mt19937_64&)>& make_body, std::mt19937_64& rng) {
  ComponentResult res{name};
  for (int trial = 0; trial < 64 && res.probes < kMinProbes; ++trial) {
    std::vector<double> x;
    for (const Leaf& l : leaves) {
      const auto b = random_buffer(l.shape, l.lo, l.hi, rng);
      x.insert(x.end(), b.span().begin(), b.span().end());
    }
    const Body body = make_body(rng);
    const auto report = diff::finite_diff_check(tape_function(leaves, body), x, 1e-4);
    res.max_rel_error = std::max(res.max_rel_error, report.max_rel_error);
    res.probes += report.probes;
    res.rejected += report.rejected;
  }
  return res;
}

grids::GridGeometry toy_geometry(std::size_t C, std::size_t L) { return {C, L, grids::Box{}}; }

}  // namespace

std::vector<ComponentResult> gradcheck_ops(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<ComponentResult> out;
  auto fixed = [](Body b) { return [b](std::mt19937_64&) { return b; }; };
  const std::uint64_t w = seed + 17;

  out.push_back(run_component("linear", {{{5, 4}}, {{3, 4}}, {{3}}},
                              fixed([w](Tape<double>& t, const Leaves& v) {
                                return project(t, diff::linear(v[0], v[1], v[2]), w);
                              }),
                              rng));
  out.push_back(run_component("linear_nobias", {{{5, 4}}, {{3, 4}}},
                              fixed([w](Tape<double>& t, const Leaves& v) {
                                return project(t, diff::linear(v[0], v[1]), w);
                              }),
                              rng));
  const std::vector<std::pair<std::string, std::function<Var<double>(Var<double>)>>> unary{
      {"relu", [](Var<double> x) { return diff::relu(x); }},
      {"sigmoid", [](Var<double> x) { return diff::sigmoid(x); }},
      {"softplus", [](Var<double> x) { return diff::softplus(x, -1.0); }},
      {"sin", [](Var<double> x) { return diff::sin(x); }},
      {"cos", [](Var<double> x) { return diff::cos(x); }},
      {"scale", [](Var<double> x) { return diff::scale(x, 2.5); }},
      {"row_norm2", [](Var<double> x) { return diff::row_norm2(x); }},
      {"slice_cols", [](Var<double> x) { return diff::slice_cols(x, 1, 2); }},
      {"repeat_rows", [](Var<double> x) { return diff::repeat_rows(x, std::size_t{3}); }},
      {"encode", [](Var<double> x) { return fields::encode(x, 4); }},
  };
  for (const auto& [name, f] : unary) {
    out.push_back(run_component(name, {{{40, 3}, -2.0, 2.0}},
                                fixed([w, f](Tape<double>& t, const Leaves& v) { return project(t, f(v[0]), w); }),
                                rng));
  }
  const std::vector<std::pair<std::string, std::function<Var<double>(Var<double>)>>> reductions{
      {"sum", [](Var<double> x) { return diff::sum(x); }},
      {"l1", [](Var<double> x) { return diff::l1(x); }},
      {"norm2", [](Var<double> x) { return diff::norm2(x); }},
  };
  for (const auto& [name, f] : reductions) {
    out.push_back(run_component(name, {{{20, 6}, -2.0, 2.0}},
                                fixed([f](Tape<double>&, const Leaves& v) { return f(v[0]); }), rng));
  }
  const std::vector<std::pair<std::string, std::function<Var<double>(Var<double>, Var<double>)>>> binary{
      {"add", [](Var<double> a, Var<double> b) { return diff::add(a, b); }},
      {"sub", [](Var<double> a, Var<double> b) { return diff::sub(a, b); }},
      {"mul", [](Var<double> a, Var<double> b) { return diff::mul(a, b); }},
      {"concat", [](Var<double> a, Var<double> b) { return diff::concat({a, b}); }},
  };
  for (const auto& [name, f] : binary) {
    out.push_back(run_component(name, {{{20, 3}}, {{20, 3}}},
                                fixed([w, f](Tape<double>& t, const Leaves& v) { return project(t, f(v[0], v[1]), w); }),
                                rng));
  }

  // Grid sampling: values as leaves with fixed points, then points as leaves with fixed values.
  const auto g8 = toy_geometry(2, 8);
  auto random_points = [](std::mt19937_64& r, std::size_t n, double extent) {
    return random_buffer({n, 3}, -extent, extent, r);
  };
  for (std::size_t K : {std::size_t{1}, std::size_t{3}}) {
    out.push_back(run_component(
        "sample_grid_values_K" + std::to_string(K), {{g8.shape()}},
        [&, K](std::mt19937_64& r) -> Body {
          const auto pts = random_points(r, 12, 1.1);
          return [g8, pts, K, w](Tape<double>& t, const Leaves& v) {
            return project(t, grids::sample_grid(g8, v[0], t.constant(pts), K), w);
          };
        },
        rng));
    out.push_back(run_component(
        "sample_grid_points_K" + std::to_string(K), {{{40, 3}, -0.95, 0.95}},
        [&, K](std::mt19937_64& r) -> Body {
          const auto vals = random_buffer(g8.shape(), -1.0, 1.0, r);
          return [g8, vals, K, w](Tape<double>& t, const Leaves& v) {
            return project(t, grids::sample_grid(g8, t.constant(vals), v[0], K), w);
          };
        },
        rng));
  }
  const auto g6 = toy_geometry(2, 6);
  constexpr std::size_t N = 3, perray = 4;
  out.push_back(run_component(
      "sample_mvg_values", {{g6.shape()}, {g6.shape()}, {g6.shape()}},
      [&](std::mt19937_64& r) -> Body {
        const auto pts = random_points(r, 2 * perray, 1.0);
        const auto theta = random_buffer({2, N}, -1.0, 1.0, r);
        return [g6, pts, theta, w, perray](Tape<double>& t, const Leaves& v) {
          return project(t, grids::sample_mvg<double>(g6, v, theta, perray, t.constant(pts), 3), w);
        };
      },
      rng));
  out.push_back(run_component(
      "sample_mvg_points", {{{2 * perray, 3}, -0.95, 0.95}},
      [&](std::mt19937_64& r) -> Body {
        std::vector<Buffer<double>> bases;
        for (std::size_t i = 0; i < N; ++i) bases.push_back(random_buffer(g6.shape(), -1.0, 1.0, r));
        const auto theta = random_buffer({2, N}, -1.0, 1.0, r);
        return [g6, bases, theta, w, perray](Tape<double>& t, const Leaves& v) {
          Leaves b;
          for (const auto& x : bases) b.push_back(t.constant(x));
          return project(t, grids::sample_mvg<double>(g6, b, theta, perray, v[0], 3), w);
        };
      },
      rng));

  const std::size_t R = 4, M = 8;
  out.push_back(run_component(
      "composite", {{{R * M, 1}, 0.0, 3.0}, {{R * M, 3}, 0.0, 1.0}},
      [&](std::mt19937_64& r) -> Body {
        const auto deltas = random_buffer({R, M}, 0.05, 0.4, r);
        return [deltas, w](Tape<double>& t, const Leaves& v) {
          return project(t, render::composite<double>(v[0], v[1], deltas, {0.3, 0.6, 0.9}), w);
        };
      },
      rng));
  return out;
}

namespace {

// Random rays through the default box with random jitter and targets.
train::RayBatch toy_batch(std::size_t rays, std::size_t M, std::size_t N, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), u01(0.0, 1.0);
  train::RayBatch b;
  b.samples_per_ray = M;
  const render::RayBounds bounds{0.1, 10.0, grids::Box{}};
  while (b.size() < rays) {
    const render::Vec3 origin{3.0 * u(rng), 3.0 * u(rng), 3.0};
    const render::Vec3 target{0.6 * u(rng), 0.6 * u(rng), 0.6 * u(rng)};
    const render::Ray ray =
        render::make_ray(origin, {target[0] - origin[0], target[1] - origin[1], target[2] - origin[2]}, bounds);
    if (ray.empty) continue;
    b.rays.push_back(ray);
    b.frame.push_back(0);
    b.pixel.push_back(0);
    b.target.push_back({static_cast<float>(u01(rng)), static_cast<float>(u01(rng)), static_cast<float>(u01(rng))});
    std::vector<double> theta(N);
    for (double& t : theta) t = u(rng);
    b.theta.push_back(theta);
    for (std::size_t i = 0; i < M; ++i) b.jitter.push_back(u01(rng));
  }
  return b;
}

}  // namespace

std::vector<ComponentResult> gradcheck_model(std::uint64_t seed) {
  std::vector<ComponentResult> out;
  for (fields::Variant variant : {fields::Variant::full, fields::Variant::mlp_deform, fields::Variant::no_decouple}) {
    std::mt19937_64 rng(seed * 31 + static_cast<std::uint64_t>(variant));
    fields::ModelConfig cfg;
    cfg.variant = variant;
    cfg.expression_dims = 2;
    cfg.scales = 2;
    cfg.appearance = {4, 4};
    cfg.motion = {2, 4};
    cfg.no_decouple = {2, 4};
    cfg.hidden = 8;
    cfg.deform_hidden = 8;

    diff::ParamStore<double> store;
    const auto model = fields::AvatarModel<double>::create(cfg, store, seed);
    // Nonzero everywhere so zero-initialized layers do not hide gradient paths.
    std::vector<double> x;
    std::vector<std::size_t> sizes;
    for (std::size_t i = 0; i < store.size(); ++i) {
      auto& p = store[diff::ParamId{i}];
      const double bound = p.group == diff::ParamGroup::grids ? 1.0 : 0.6;
      std::uniform_real_distribution<double> ud(-bound, bound);
      for (double& v : p.value.span()) v = ud(rng);
      x.insert(x.end(), p.value.span().begin(), p.value.span().end());
      sizes.push_back(p.value.size());
    }
    const train::RayBatch batch = toy_batch(6, 8, cfg.expression_dims, rng);

    const diff::ScalarFunction f = [&](std::span<const double> xs, std::span<double> grad) {
      std::size_t at = 0;
      for (std::size_t i = 0; i < store.size(); ++i) {
        auto s = store[diff::ParamId{i}].value.span();
        std::copy(xs.begin() + at, xs.begin() + at + s.size(), s.begin());
        at += s.size();
      }
      diff::GradientSet<double> grads(store);
      Tape<double> tape(grads);
      tape.set_branch_tracking(true);
      const auto terms = train::build_loss(tape, model, store, batch, 0, batch.size(), 0.01, {1.0, 1.0, 1.0});
      const double value = terms.total->value()[0];
      if (!grad.empty()) {
        tape.backward(*terms.total);
        std::size_t k = 0;
        for (std::size_t i = 0; i < store.size(); ++i) {
          for (double g : grads[diff::ParamId{i}].span()) grad[k++] = g;
        }
      }
      return diff::Evaluation{value, tape.branch_signature()};
    };

    // Probe every parameter group: coordinates with a live gradient first, a few arbitrary ones too.
    std::vector<double> g(x.size());
    f(x, g);
    std::vector<std::size_t> live, coords;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g[i] != 0.0) live.push_back(i);
    }
    std::shuffle(live.begin(), live.end(), rng);
    coords.assign(live.begin(), live.begin() + std::min<std::size_t>(live.size(), 140));
    std::uniform_int_distribution<std::size_t> any(0, x.size() - 1);
    for (int i = 0; i < 20; ++i) coords.push_back(any(rng));

    const auto report = diff::finite_diff_check(f, x, 1e-4, coords);
    out.push_back({"model_" + std::string(fields::to_string(variant)), report.max_rel_error, report.probes,
                   report.rejected});
  }
  return out;
}

std::vector<ComponentResult> gradcheck_loss(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<ComponentResult> out;
  const double lambda = 0.01;
  auto make_gt = [](std::mt19937_64& r) { return random_buffer({60, 3}, 0.0, 1.0, r); };
  out.push_back(run_component(
      "photometric_loss", {{{60, 3}, 0.0, 1.0}},
      [&](std::mt19937_64& r) -> Body {
        const auto gt = make_gt(r);
        return [gt](Tape<double>& t, const Leaves& v) { return train::photometric_loss(v[0], t.constant(gt)); };
      },
      rng));
  out.push_back(run_component("offset_regularizer", {{{60, 3}, -0.2, 0.2}},
                              [](std::mt19937_64&) -> Body {
                                return [](Tape<double>&, const Leaves& v) { return train::offset_regularizer(v[0]); };
                              },
                              rng));
  out.push_back(run_component(
      "total_loss", {{{60, 3}, 0.0, 1.0}, {{60, 3}, -0.2, 0.2}},
      [&](std::mt19937_64& r) -> Body {
        const auto gt = make_gt(r);
        return [gt, lambda](Tape<double>& t, const Leaves& v) {
          return diff::add(train::photometric_loss(v[0], t.constant(gt)),
                           diff::scale(train::offset_regularizer(v[1]), lambda));
        };
      },
      rng));

  // Additivity: ∇total = ∇photo + λ∇reg, compared over the shared leaf layout.
  ComponentResult add{"total_equals_photo_plus_lambda_reg"};
  for (int trial = 0; trial < 4; ++trial) {
    const auto gt = make_gt(rng);
    std::vector<double> x;
    for (const auto& b : {random_buffer({60, 3}, 0.0, 1.0, rng), random_buffer({60, 3}, -0.2, 0.2, rng)}) {
      x.insert(x.end(), b.span().begin(), b.span().end());
    }
    const std::vector<Leaf> leaves{{{60, 3}}, {{60, 3}}};
    std::vector<double> gp(x.size()), gr(x.size()), gt_total(x.size());
    tape_function(leaves, [&](Tape<double>& t, const Leaves& v) {
      return diff::add(train::photometric_loss(v[0], t.constant(gt)), diff::scale(diff::sum(v[1]), 0.0));
    })(x, gp);
    tape_function(leaves, [&](Tape<double>&, const Leaves& v) {
      return diff::add(diff::scale(diff::sum(v[0]), 0.0), train::offset_regularizer(v[1]));
    })(x, gr);
    tape_function(leaves, [&](Tape<double>& t, const Leaves& v) {
      return diff::add(train::photometric_loss(v[0], t.constant(gt)),
                       diff::scale(train::offset_regularizer(v[1]), lambda));
    })(x, gt_total);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double expect = gp[i] + lambda * gr[i];
      add.max_rel_error = std::max(add.max_rel_error, std::abs(gt_total[i] - expect) / std::max(1.0, std::abs(expect)));
      ++add.probes;
    }
  }
  out.push_back(add);
  return out;
}

}  // namespace movox::cli
