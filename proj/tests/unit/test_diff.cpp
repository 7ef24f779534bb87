// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "movox/diff/adam.hpp"
#include "movox/diff/gradcheck.hpp"
#include "movox/diff/ops.hpp"
#include "movox/diff/param_store.hpp"
#include "movox/diff/tape.hpp"
#include "movox/error.hpp"

using namespace movox;
using namespace movox::diff;

namespace {

Buffer<double> row(std::vector<double> v) {
  const std::size_t n = v.size();
  return Buffer<double>(Shape{1, n}, std::move(v));
}

}  // namespace

TEST_CASE("relu clamps negatives") {
  Tape<double> tape;
  auto y = relu(tape.constant(row({-1.0, 2.0})));
  CHECK(y.value().values() == std::vector<double>{0.0, 2.0});
}

TEST_CASE("sin at zero and its derivative") {
  ParamStore<double> store;
  const ParamId p = store.add("x", ParamGroup::mlps, row({0.0}));
  GradientSet<double> grads(store);
  Tape<double> tape(grads);
  auto y = diff::sin(tape.parameter(store, p));
  CHECK(y.value()[0] == 0.0);
  tape.backward(sum(y));
  CHECK(grads[p][0] == doctest::Approx(1.0));
}

TEST_CASE("concat joins columns and splits gradients by extent") {
  ParamStore<double> store;
  const ParamId a = store.add("a", ParamGroup::mlps, row({1.0, 2.0}));
  const ParamId b = store.add("b", ParamGroup::mlps, row({3.0}));
  GradientSet<double> grads(store);
  Tape<double> tape(grads);
  auto joined = concat({tape.parameter(store, a), tape.parameter(store, b)});
  CHECK(joined.value().values() == std::vector<double>{1.0, 2.0, 3.0});
  auto weights = tape.constant(row({10.0, 20.0, 30.0}));
  tape.backward(sum(mul(joined, weights)));
  CHECK(grads[a].values() == std::vector<double>{10.0, 20.0});
  CHECK(grads[b].values() == std::vector<double>{30.0});
}

TEST_CASE("sum of a parameter has unit gradient; unreachable parameters get exact zeros") {
  ParamStore<double> store;
  const ParamId p = store.add("p", ParamGroup::mlps, row({0.3, -1.2, 4.0}));
  const ParamId q = store.add("q", ParamGroup::grids, row({5.0, 6.0}));
  GradientSet<double> grads(store);
  Tape<double> tape(grads);
  tape.parameter(store, q);
  tape.backward(sum(tape.parameter(store, p)));
  CHECK(grads[p].values() == std::vector<double>{1.0, 1.0, 1.0});
  CHECK(grads[q].values() == std::vector<double>{0.0, 0.0});
}

TEST_CASE("norm of w*x at w=(3,4), x=1 has gradient (0.6, 0.8)") {
  ParamStore<double> store;
  const ParamId w = store.add("w", ParamGroup::mlps, row({3.0, 4.0}));
  GradientSet<double> grads(store);
  Tape<double> tape(grads);
  auto loss = norm2(mul(tape.parameter(store, w), tape.constant(row({1.0, 1.0}))));
  CHECK(loss.value()[0] == doctest::Approx(5.0));
  tape.backward(loss);

  // Independent central differences of the closed form.
  const double eps = 1e-4;
  auto f = [](double a, double b) { return std::sqrt(a * a + b * b); };
  const double fd0 = (f(3 + eps, 4) - f(3 - eps, 4)) / (2 * eps);
  const double fd1 = (f(3, 4 + eps) - f(3, 4 - eps)) / (2 * eps);
  CHECK(grads[w][0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(grads[w][1] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(std::abs(grads[w][0] - fd0) < 1e-8);
  CHECK(std::abs(grads[w][1] - fd1) < 1e-8);
}

TEST_CASE("two-layer MLP gradients match finite differences") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  auto random = [&](std::size_t r, std::size_t c) {
    Buffer<double> b = Buffer<double>::matrix(r, c);
    for (auto& v : b.values()) v = U(rng);
    return b;
  };
  const Buffer<double> x = random(5, 6);
  const std::vector<std::pair<const char*, Buffer<double>>> init = {
      {"w1", random(7, 6)}, {"b1", random(1, 7)}, {"w2", random(2, 7)}, {"b2", random(1, 2)}};

  ScalarFunction f = [&](std::span<const double> flat, std::span<double> grad) {
    ParamStore<double> store;
    std::size_t o = 0;
    std::vector<ParamId> ids;
    for (const auto& [name, b] : init) {
      Buffer<double> v(b.shape());
      for (auto& e : v.values()) e = flat[o++];
      ids.push_back(store.add(name, ParamGroup::mlps, std::move(v)));
    }
    GradientSet<double> grads(store);
    Tape<double> tape(grads);
    tape.set_branch_tracking(true);
    auto h = relu(linear(tape.constant(x), tape.parameter(store, ids[0]), tape.parameter(store, ids[1])));
    auto y = sigmoid(linear(h, tape.parameter(store, ids[2]), tape.parameter(store, ids[3])));
    auto loss = sum(y);
    const double value = loss.value()[0];
    if (!grad.empty()) {
      tape.backward(loss);
      o = 0;
      for (const ParamId id : ids) {
        for (double g : grads[id].values()) grad[o++] = g;
      }
    }
    return Evaluation{value, tape.branch_signature()};
  };
  std::vector<double> flat;
  for (const auto& [name, b] : init) flat.insert(flat.end(), b.values().begin(), b.values().end());
  const GradCheckReport report = finite_diff_check(f, flat);
  CHECK(report.probes + report.rejected == flat.size());
  CHECK(report.probes >= flat.size() / 2);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("finite_diff_check on closed-form functions") {
  SUBCASE("x squared at 3") {
    ScalarFunction f = [](std::span<const double> x, std::span<double> g) {
      if (!g.empty()) g[0] = 2 * x[0];
      return Evaluation{x[0] * x[0], 0};
    };
    const std::vector<double> x{3.0};
    CHECK(finite_diff_check(f, x).max_rel_error < 1e-8);
  }
  SUBCASE("constant") {
    ScalarFunction f = [](std::span<const double>, std::span<double> g) {
      if (!g.empty()) g[0] = 0.0;
      return Evaluation{4.2, 0};
    };
    const std::vector<double> x{1.5};
    const auto r = finite_diff_check(f, x);
    CHECK(r.max_rel_error == 0.0);
    CHECK(r.probes == 1);
  }
  SUBCASE("wrong analytic gradient is reported, not thrown") {
    ScalarFunction f = [](std::span<const double> x, std::span<double> g) {
      if (!g.empty()) g[0] = 3 * x[0];
      return Evaluation{x[0] * x[0], 0};
    };
    const std::vector<double> x{2.0};
    CHECK(finite_diff_check(f, x).max_rel_error > 0.1);
  }
}

TEST_CASE("backward rejects a non-scalar loss") {
  ParamStore<double> store;
  const ParamId p = store.add("p", ParamGroup::mlps, row({1.0, 2.0}));
  GradientSet<double> grads(store);
  Tape<double> tape(grads);
  CHECK_THROWS_AS(tape.backward(tape.parameter(store, p)), ContractError);
}

TEST_CASE("shape mismatch names the op and both shapes") {
  Tape<double> tape;
  auto a = tape.constant(row({1.0, 2.0}));
  auto b = tape.constant(row({1.0, 2.0, 3.0}));
  try {
    add(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("add") != std::string::npos);
    CHECK(msg.find("[1, 2]") != std::string::npos);
    CHECK(msg.find("[1, 3]") != std::string::npos);
  }
}

TEST_CASE("non-finite forward output is a numeric error") {
  Tape<double> tape;
  auto big = tape.constant(row({std::numeric_limits<double>::max()}));
  CHECK_THROWS_AS(scale(big, 10.0), NumericError);
  CHECK_THROWS_AS(diff::sin(tape.constant(row({std::numeric_limits<double>::infinity()}))), NumericError);
}

TEST_CASE("backward is deterministic") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> U(-1.0f, 1.0f);
  Buffer<float> w = Buffer<float>::matrix(8, 16), x = Buffer<float>::matrix(32, 16);
  for (auto& v : w.values()) v = U(rng);
  for (auto& v : x.values()) v = U(rng);
  auto run = [&] {
    ParamStore<float> store;
    const ParamId id = store.add("w", ParamGroup::mlps, w);
    GradientSet<float> grads(store);
    Tape<float> tape(grads);
    tape.backward(l1(relu(linear(tape.constant(x), tape.parameter(store, id)))));
    return grads[id];
  };
  CHECK(run() == run());
}

TEST_CASE("gradient buffers match forward shapes") {
  ParamStore<double> store;
  const ParamId w = store.add("w", ParamGroup::mlps, Buffer<double>::matrix(2, 3, 0.5));
  GradientSet<double> grads(store);
  Tape<double> tape(grads);
  auto x = tape.constant(Buffer<double>::matrix(4, 3, 1.0));
  auto y = linear(x, tape.parameter(store, w));
  tape.backward(sum(y));
  CHECK(tape.grad(y.id).shape() == y.shape());
  CHECK(grads[w].shape() == store[w].value.shape());
}

TEST_CASE("adam: zero gradient leaves parameters fixed and counts steps") {
  ParamStore<float> store;
  const ParamId p = store.add("p", ParamGroup::grids, Buffer<float>(Shape{3}, std::vector<float>{1, -2, 3}));
  GradientSet<float> grads(store);
  for (int t = 0; t < 5; ++t) adam_step(store, grads);
  CHECK(store[p].value.values() == std::vector<float>{1, -2, 3});
  CHECK(store.moments(p).step == 5);
}

TEST_CASE("adam: first step from p=0, g=1, lr=0.01") {
  ParamStore<double> store;
  store.set_learning_rate(ParamGroup::grids, 0.01);
  const ParamId p = store.add("p", ParamGroup::grids, Buffer<double>::scalar(0.0));
  GradientSet<double> grads(store);
  grads[p][0] = 1.0;
  adam_step(store, grads);
  // m̂ = 1, v̂ = 1 after bias correction.
  CHECK(store[p].value[0] == doctest::Approx(-0.01 / (1.0 + 1e-8)).epsilon(1e-12));
  CHECK(store[p].value[0] > -0.01);
}

TEST_CASE("adam: group learning rates scale the step") {
  ParamStore<double> store;
  store.set_learning_rate(ParamGroup::grids, 1e-2);
  store.set_learning_rate(ParamGroup::mlps, 1e-3);
  const ParamId g = store.add("grid", ParamGroup::grids, Buffer<double>::scalar(0.0));
  const ParamId m = store.add("mlp", ParamGroup::mlps, Buffer<double>::scalar(0.0));
  GradientSet<double> grads(store);
  grads[g][0] = 0.7;
  grads[m][0] = 0.7;
  adam_step(store, grads);
  CHECK(std::abs(store[g].value[0]) == doctest::Approx(10.0 * std::abs(store[m].value[0])));
}

TEST_CASE("adam: misaligned gradients are a contract error") {
  ParamStore<float> store;
  store.add("a", ParamGroup::grids, Buffer<float>::scalar(0.0f));
  ParamStore<float> other;
  GradientSet<float> empty(other);
  CHECK_THROWS_AS(adam_step(store, empty), ContractError);
}

TEST_CASE("adam moments keep parameter shapes") {
  ParamStore<float> store;
  const ParamId p = store.add("a", ParamGroup::grids, Buffer<float>(Shape{2, 3, 4}));
  CHECK(store.moments(p).m.shape() == store[p].value.shape());
  CHECK(store.moments(p).v.shape() == store[p].value.shape());
  CHECK(to_string(store[p].group) == "grids");
  CHECK_THROWS_AS(store.add("a", ParamGroup::mlps, Buffer<float>::scalar(1.0f)), ContractError);
}

TEST_CASE("backward corruption hook changes gradients") {
  ParamStore<double> store;
  const ParamId p = store.add("p", ParamGroup::mlps, row({0.5, 0.25}));
  auto grad = [&] {
    GradientSet<double> grads(store);
    Tape<double> tape(grads);
    tape.backward(sum(diff::sin(tape.parameter(store, p))));
    return grads[p][0];
  };
  const double clean = grad();
  testing::set_backward_corruption("sin", 1.5);
  const double corrupted = grad();
  testing::clear_backward_corruption();
  CHECK(corrupted == doctest::Approx(1.5 * clean));
  CHECK(grad() == clean);
}
