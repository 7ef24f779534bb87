// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "movox/diff/buffer.hpp"
#include "movox/diff/param_store.hpp"

namespace movox::diff {

using NodeId = std::uint32_t;

template <typename Real>
class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <typename Real>
struct Var {
  Tape<Real>* tape = nullptr;
  NodeId id = 0;

  const Buffer<Real>& value() const { return tape->value(id); }
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Define-by-run reverse-mode gradient tape.
///
/// Nodes are appended in evaluation order, so the record order is a topological
/// order and backward() simply walks it in reverse. Parameter leaves read their
/// values straight from a ParamStore and accumulate gradients into the
/// GradientSet the tape was built with. A tape built without a GradientSet
/// records values only (inference).
template <typename Real>
class Tape {
 public:
  /// Receives the tape and the id of the node whose gradient is ready.
  using BackwardFn = std::function<void(Tape&, NodeId)>;

  Tape() = default;
  explicit Tape(GradientSet<Real>& grads) : grads_(&grads) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool differentiable() const noexcept { return grads_ != nullptr; }

  Var<Real> constant(Buffer<Real> value);
  Var<Real> parameter(const ParamStore<Real>& store, ParamId id);

  /// Appends an op node. `backward` is dropped when no input requires a gradient.
  Var<Real> record(std::string_view op, Buffer<Real> value, std::vector<NodeId> inputs, BackwardFn backward);

  const Buffer<Real>& value(NodeId id) const;
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  std::string_view op(NodeId id) const { return nodes_[id].op; }
  std::optional<ParamId> param_of(NodeId id) const { return nodes_[id].param; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Gradient accumulator for a node, zero-initialized on first access.
  Buffer<Real>& grad(NodeId id);
  bool has_grad(NodeId id) const { return nodes_[id].grad_ready || nodes_[id].param.has_value(); }

  /// Seeds d(loss)/d(loss) = 1 and propagates. `loss` must hold one element.
  void backward(Var<Real> loss);

  /// Branch tracking: non-smooth ops (relu, clamps, cell lookups, |x|) hash the
  /// discrete decision they took, so finite-difference oracles can reject probes
  /// whose perturbation crossed a kink.
  void set_branch_tracking(bool on) noexcept { track_branches_ = on; }
  bool tracking_branches() const noexcept { return track_branches_; }
  void note_branch(std::uint64_t key) noexcept;
  std::uint64_t branch_signature() const noexcept { return branch_hash_; }

 private:
  struct Node {
    std::string_view op;
    Buffer<Real> owned;
    const Buffer<Real>* external = nullptr;
    Buffer<Real> grad;
    bool grad_ready = false;
    bool requires_grad = false;
    std::optional<ParamId> param;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  GradientSet<Real>* grads_ = nullptr;
  bool track_branches_ = false;
  std::uint64_t branch_hash_ = 1469598103934665603ull;
};

namespace testing {

/// Test hook: scale the incoming gradient of every node of kind `op` by `factor`
/// before its backward runs. Used to prove the gradient checker catches bugs.
void set_backward_corruption(std::string op, double factor);
void clear_backward_corruption();

}  // namespace testing

}  // namespace movox::diff
