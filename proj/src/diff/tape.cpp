// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/diff/tape.hpp"

#include <mutex>

namespace movox::diff {

namespace {

struct Corruption {
  std::mutex mutex;
  std::string op;
  double factor = 1.0;
  bool active = false;
};

Corruption& corruption() {
  static Corruption c;
  return c;
}

}  // namespace

namespace testing {

void set_backward_corruption(std::string op, double factor) {
  auto& c = corruption();
  std::lock_guard lock(c.mutex);
  c.op = std::move(op);
  c.factor = factor;
  c.active = true;
}

void clear_backward_corruption() {
  auto& c = corruption();
  std::lock_guard lock(c.mutex);
  c.active = false;
}

}  // namespace testing

template <typename Real>
Var<Real> Tape<Real>::constant(Buffer<Real> value) {
  Node node;
  node.op = "constant";
  node.owned = std::move(value);
  nodes_.push_back(std::move(node));
  return {this, static_cast<NodeId>(nodes_.size() - 1)};
}

template <typename Real>
Var<Real> Tape<Real>::parameter(const ParamStore<Real>& store, ParamId id) {
  Node node;
  node.op = "parameter";
  node.external = &store[id].value;
  node.param = id;
  node.requires_grad = grads_ != nullptr;
  if (grads_ && (*grads_)[id].shape() != node.external->shape()) {
    throw ContractError("tape: gradient set does not match parameter '" + store[id].name + "'");
  }
  nodes_.push_back(std::move(node));
  return {this, static_cast<NodeId>(nodes_.size() - 1)};
}

template <typename Real>
Var<Real> Tape<Real>::record(std::string_view op, Buffer<Real> value, std::vector<NodeId> inputs,
                             BackwardFn backward) {
  require_finite<Real>(value.span(), std::string("op '") + std::string(op) + "'");
  Node node;
  node.op = op;
  node.owned = std::move(value);
  for (NodeId in : inputs) node.requires_grad = node.requires_grad || nodes_.at(in).requires_grad;
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return {this, static_cast<NodeId>(nodes_.size() - 1)};
}

template <typename Real>
const Buffer<Real>& Tape<Real>::value(NodeId id) const {
  const Node& n = nodes_.at(id);
  return n.external ? *n.external : n.owned;
}

template <typename Real>
Buffer<Real>& Tape<Real>::grad(NodeId id) {
  Node& n = nodes_.at(id);
  if (n.param && grads_) return (*grads_)[*n.param];
  if (!n.grad_ready) {
    n.grad = Buffer<Real>(value(id).shape());
    n.grad_ready = true;
  }
  return n.grad;
}

template <typename Real>
void Tape<Real>::backward(Var<Real> loss) {
  if (loss.tape != this) throw ContractError("backward: loss belongs to another tape");
  if (!value(loss.id).is_scalar()) {
    throw ContractError("backward: loss must be scalar, got shape " + to_string(value(loss.id).shape()));
  }
  if (!nodes_[loss.id].requires_grad) return;

  std::string corrupt_op;
  double corrupt_factor = 1.0;
  {
    auto& c = corruption();
    std::lock_guard lock(c.mutex);
    if (c.active) {
      corrupt_op = c.op;
      corrupt_factor = c.factor;
    }
  }

  grad(loss.id)[0] += Real(1);
  for (NodeId id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward || !n.grad_ready) continue;
    if (!corrupt_op.empty() && n.op == corrupt_op) {
      for (auto& g : n.grad.span()) g *= static_cast<Real>(corrupt_factor);
    }
    n.backward(*this, id);
  }
}

template <typename Real>
void Tape<Real>::note_branch(std::uint64_t key) noexcept {
  if (!track_branches_) return;
  branch_hash_ ^= key + 0x9e3779b97f4a7c15ull + (branch_hash_ << 6) + (branch_hash_ >> 2);
}

template class Tape<float>;
template class Tape<double>;

}  // namespace movox::diff
