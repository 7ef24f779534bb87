// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/diff/ops.hpp"

#include <Eigen/Core>
#include <cmath>

namespace movox::diff {

namespace {

template <typename Real>
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using MatMap = Eigen::Map<RowMat<Real>>;
template <typename Real>
using ConstMatMap = Eigen::Map<const RowMat<Real>>;

template <typename Real>
ConstMatMap<Real> as_matrix(const Buffer<Real>& b, std::size_t rows, std::size_t cols) {
  return ConstMatMap<Real>(b.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
template <typename Real>
MatMap<Real> as_matrix(Buffer<Real>& b, std::size_t rows, std::size_t cols) {
  return MatMap<Real>(b.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

[[noreturn]] void shape_error(std::string_view op, const std::string& detail) {
  throw ShapeError("op '" + std::string(op) + "': " + detail);
}

template <typename Real>
void require_same_shape(std::string_view op, const Var<Real>& a, const Var<Real>& b) {
  if (a.tape != b.tape) throw ContractError("op '" + std::string(op) + "': operands on different tapes");
  if (a.shape() != b.shape()) {
    shape_error(op, "operand shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) + " differ");
  }
}

template <typename Real>
void require_rank2(std::string_view op, const Var<Real>& x) {
  if (x.shape().size() != 2) shape_error(op, "expected a rank-2 input, got " + to_string(x.shape()));
}

inline std::uint64_t branch_key(std::size_t index, std::uint64_t decision) {
  return (static_cast<std::uint64_t>(index) << 2) ^ decision;
}

// y = f(x) elementwise; df(x, y) is dy/dx.
template <typename Real, typename F, typename DF>
Var<Real> elementwise(std::string_view op, Var<Real> x, F f, DF df) {
  const Buffer<Real>& xv = x.value();
  Buffer<Real> y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = f(xv[i]);
  return x.tape->record(op, std::move(y), {x.id}, [xid = x.id, df](Tape<Real>& t, NodeId self) {
    const Buffer<Real>& xv = t.value(xid);
    const Buffer<Real>& yv = t.value(self);
    const Buffer<Real>& gy = t.grad(self);
    Buffer<Real>& gx = t.grad(xid);
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += gy[i] * df(xv[i], yv[i]);
  });
}

}  // namespace

template <typename Real>
Var<Real> linear(Var<Real> x, Var<Real> w, Var<Real> b) {
  constexpr std::string_view op = "linear";
  require_rank2(op, x);
  require_rank2(op, w);
  const std::size_t rows = x.rows(), in = x.cols(), out = w.rows();
  if (w.cols() != in) shape_error(op, "input " + to_string(x.shape()) + " vs weight " + to_string(w.shape()));
  if (b.value().size() != out) shape_error(op, "bias " + to_string(b.shape()) + " vs weight " + to_string(w.shape()));

  Buffer<Real> y = Buffer<Real>::matrix(rows, out);
  auto ym = as_matrix(y, rows, out);
  ym.noalias() = as_matrix(x.value(), rows, in) * as_matrix(w.value(), out, in).transpose();
  ym.rowwise() += as_matrix(b.value(), 1, out).row(0);

  return x.tape->record(op, std::move(y), {x.id, w.id, b.id},
                        [xid = x.id, wid = w.id, bid = b.id, rows, in, out](Tape<Real>& t, NodeId self) {
                          const auto gy = as_matrix(t.grad(self), rows, out);
                          if (t.requires_grad(xid)) {
                            as_matrix(t.grad(xid), rows, in).noalias() += gy * as_matrix(t.value(wid), out, in);
                          }
                          if (t.requires_grad(wid)) {
                            as_matrix(t.grad(wid), out, in).noalias() += gy.transpose() * as_matrix(t.value(xid), rows, in);
                          }
                          if (t.requires_grad(bid)) {
                            Real* gb = t.grad(bid).data();
                            const Real* g = t.grad(self).data();
                            for (std::size_t r = 0; r < rows; ++r) {
                              for (std::size_t o = 0; o < out; ++o) gb[o] += g[r * out + o];
                            }
                          }
                        });
}

template <typename Real>
Var<Real> linear(Var<Real> x, Var<Real> w) {
  constexpr std::string_view op = "linear";
  require_rank2(op, x);
  require_rank2(op, w);
  const std::size_t rows = x.rows(), in = x.cols(), out = w.rows();
  if (w.cols() != in) shape_error(op, "input " + to_string(x.shape()) + " vs weight " + to_string(w.shape()));

  Buffer<Real> y = Buffer<Real>::matrix(rows, out);
  as_matrix(y, rows, out).noalias() = as_matrix(x.value(), rows, in) * as_matrix(w.value(), out, in).transpose();

  return x.tape->record(op, std::move(y), {x.id, w.id}, [xid = x.id, wid = w.id, rows, in, out](Tape<Real>& t, NodeId self) {
    const auto gy = as_matrix(t.grad(self), rows, out);
    if (t.requires_grad(xid)) {
      as_matrix(t.grad(xid), rows, in).noalias() += gy * as_matrix(t.value(wid), out, in);
    }
    if (t.requires_grad(wid)) {
      as_matrix(t.grad(wid), out, in).noalias() += gy.transpose() * as_matrix(t.value(xid), rows, in);
    }
  });
}

template <typename Real>
Var<Real> relu(Var<Real> x) {
  Tape<Real>& tape = *x.tape;
  if (tape.tracking_branches()) {
    const auto& xv = x.value();
    for (std::size_t i = 0; i < xv.size(); ++i) tape.note_branch(branch_key(i, xv[i] > Real(0)));
  }
  return elementwise<Real>(
      "relu", x, [](Real v) { return v > Real(0) ? v : Real(0); },
      [](Real v, Real) { return v > Real(0) ? Real(1) : Real(0); });
}

template <typename Real>
Var<Real> sigmoid(Var<Real> x) {
  return elementwise<Real>(
      "sigmoid", x,
      [](Real v) {
        if (v >= Real(0)) return Real(1) / (Real(1) + std::exp(-v));
        const Real e = std::exp(v);
        return e / (Real(1) + e);
      },
      [](Real, Real y) { return y * (Real(1) - y); });
}

template <typename Real>
Var<Real> softplus(Var<Real> x, Real shift) {
  return elementwise<Real>(
      "softplus", x,
      [shift](Real v) {
        const Real z = v + shift;
        return std::max(z, Real(0)) + std::log1p(std::exp(-std::abs(z)));
      },
      [shift](Real v, Real) {
        const Real z = v + shift;
        if (z >= Real(0)) return Real(1) / (Real(1) + std::exp(-z));
        const Real e = std::exp(z);
        return e / (Real(1) + e);
      });
}

template <typename Real>
Var<Real> sin(Var<Real> x) {
  return elementwise<Real>(
      "sin", x, [](Real v) { return std::sin(v); }, [](Real v, Real) { return std::cos(v); });
}

template <typename Real>
Var<Real> cos(Var<Real> x) {
  return elementwise<Real>(
      "cos", x, [](Real v) { return std::cos(v); }, [](Real v, Real) { return -std::sin(v); });
}

template <typename Real>
Var<Real> scale(Var<Real> x, Real factor) {
  return elementwise<Real>(
      "scale", x, [factor](Real v) { return v * factor; }, [factor](Real, Real) { return factor; });
}

template <typename Real>
Var<Real> add(Var<Real> a, Var<Real> b) {
  require_same_shape("add", a, b);
  Buffer<Real> y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] + b.value()[i];
  return a.tape->record("add", std::move(y), {a.id, b.id}, [aid = a.id, bid = b.id](Tape<Real>& t, NodeId self) {
    const Buffer<Real>& gy = t.grad(self);
    for (NodeId in : {aid, bid}) {
      if (!t.requires_grad(in)) continue;
      Buffer<Real>& g = t.grad(in);
      for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i];
    }
  });
}

template <typename Real>
Var<Real> sub(Var<Real> a, Var<Real> b) {
  require_same_shape("sub", a, b);
  Buffer<Real> y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] - b.value()[i];
  return a.tape->record("sub", std::move(y), {a.id, b.id}, [aid = a.id, bid = b.id](Tape<Real>& t, NodeId self) {
    const Buffer<Real>& gy = t.grad(self);
    if (t.requires_grad(aid)) {
      Buffer<Real>& g = t.grad(aid);
      for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i];
    }
    if (t.requires_grad(bid)) {
      Buffer<Real>& g = t.grad(bid);
      for (std::size_t i = 0; i < gy.size(); ++i) g[i] -= gy[i];
    }
  });
}

template <typename Real>
Var<Real> mul(Var<Real> a, Var<Real> b) {
  require_same_shape("mul", a, b);
  Buffer<Real> y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] * b.value()[i];
  return a.tape->record("mul", std::move(y), {a.id, b.id}, [aid = a.id, bid = b.id](Tape<Real>& t, NodeId self) {
    const Buffer<Real>& gy = t.grad(self);
    if (t.requires_grad(aid)) {
      const Buffer<Real>& bv = t.value(bid);
      Buffer<Real>& g = t.grad(aid);
      for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i] * bv[i];
    }
    if (t.requires_grad(bid)) {
      const Buffer<Real>& av = t.value(aid);
      Buffer<Real>& g = t.grad(bid);
      for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i] * av[i];
    }
  });
}

template <typename Real>
Var<Real> concat(std::span<const Var<Real>> parts) {
  constexpr std::string_view op = "concat";
  if (parts.empty()) shape_error(op, "no inputs");
  const std::size_t rows = parts[0].rows();
  std::vector<std::size_t> widths;
  std::vector<NodeId> ids;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.tape != parts[0].tape) throw ContractError("op 'concat': operands on different tapes");
    if (p.rows() != rows) {
      shape_error(op, "row count " + std::to_string(p.rows()) + " differs from " + std::to_string(rows));
    }
    widths.push_back(p.cols());
    ids.push_back(p.id);
    total += p.cols();
  }
  Buffer<Real> y = Buffer<Real>::matrix(rows, total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Buffer<Real>& v = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.data() + r * widths[k], widths[k], y.data() + r * total + offset);
    }
    offset += widths[k];
  }
  return parts[0].tape->record(op, std::move(y), ids, [ids, widths, rows, total](Tape<Real>& t, NodeId self) {
    const Buffer<Real>& gy = t.grad(self);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.requires_grad(ids[k])) {
        Buffer<Real>& g = t.grad(ids[k]);
        for (std::size_t r = 0; r < rows; ++r) {
          const Real* src = gy.data() + r * total + offset;
          Real* dst = g.data() + r * widths[k];
          for (std::size_t c = 0; c < widths[k]; ++c) dst[c] += src[c];
        }
      }
      offset += widths[k];
    }
  });
}

template <typename Real>
Var<Real> slice_cols(Var<Real> x, std::size_t begin, std::size_t count) {
  constexpr std::string_view op = "slice_cols";
  const std::size_t rows = x.rows(), cols = x.cols();
  if (begin + count > cols || count == 0) {
    shape_error(op, "columns [" + std::to_string(begin) + ", " + std::to_string(begin + count) + ") of " +
                        to_string(x.shape()));
  }
  Buffer<Real> y = Buffer<Real>::matrix(rows, count);
  const Buffer<Real>& xv = x.value();
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(xv.data() + r * cols + begin, count, y.data() + r * count);
  return x.tape->record(op, std::move(y), {x.id}, [xid = x.id, rows, cols, begin, count](Tape<Real>& t, NodeId self) {
    const Buffer<Real>& gy = t.grad(self);
    Buffer<Real>& gx = t.grad(xid);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < count; ++c) gx[r * cols + begin + c] += gy[r * count + c];
    }
  });
}

template <typename Real>
Var<Real> repeat_rows(Var<Real> x, std::size_t times) {
  constexpr std::string_view op = "repeat_rows";
  if (times == 0) shape_error(op, "repeat count must be positive");
  const std::size_t rows = x.rows(), cols = x.cols();
  Buffer<Real> y = Buffer<Real>::matrix(rows * times, cols);
  const Buffer<Real>& xv = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < times; ++k) std::copy_n(xv.data() + r * cols, cols, y.data() + (r * times + k) * cols);
  }
  return x.tape->record(op, std::move(y), {x.id}, [xid = x.id, rows, cols, times](Tape<Real>& t, NodeId self) {
    const Buffer<Real>& gy = t.grad(self);
    Buffer<Real>& gx = t.grad(xid);
    for (std::size_t r = 0; r < rows; ++r) {
      Real* dst = gx.data() + r * cols;
      for (std::size_t k = 0; k < times; ++k) {
        const Real* src = gy.data() + (r * times + k) * cols;
        for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
      }
    }
  });
}

template <typename Real>
Var<Real> sum(Var<Real> x) {
  Real total = 0;
  for (Real v : x.value().span()) total += v;
  return x.tape->record("sum", Buffer<Real>::scalar(total), {x.id}, [xid = x.id](Tape<Real>& t, NodeId self) {
    const Real g = t.grad(self)[0];
    for (Real& v : t.grad(xid).span()) v += g;
  });
}

template <typename Real>
Var<Real> l1(Var<Real> x) {
  Tape<Real>& tape = *x.tape;
  const Buffer<Real>& xv = x.value();
  Real total = 0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    total += std::abs(xv[i]);
    if (tape.tracking_branches()) tape.note_branch(branch_key(i, (xv[i] > 0) + 2 * (xv[i] < 0)));
  }
  return tape.record("l1", Buffer<Real>::scalar(total), {x.id}, [xid = x.id](Tape<Real>& t, NodeId self) {
    const Real g = t.grad(self)[0];
    const Buffer<Real>& xv = t.value(xid);
    Buffer<Real>& gx = t.grad(xid);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      if (xv[i] > Real(0)) gx[i] += g;
      else if (xv[i] < Real(0)) gx[i] -= g;
    }
  });
}

template <typename Real>
Var<Real> norm2(Var<Real> x) {
  Tape<Real>& tape = *x.tape;
  Real sq = 0;
  for (Real v : x.value().span()) sq += v * v;
  const Real n = std::sqrt(sq);
  if (tape.tracking_branches()) tape.note_branch(branch_key(0, n > Real(0)));
  return tape.record("norm2", Buffer<Real>::scalar(n), {x.id}, [xid = x.id](Tape<Real>& t, NodeId self) {
    const Real n = t.value(self)[0];
    if (n == Real(0)) return;
    const Real g = t.grad(self)[0] / n;
    const Buffer<Real>& xv = t.value(xid);
    Buffer<Real>& gx = t.grad(xid);
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += g * xv[i];
  });
}

template <typename Real>
Var<Real> row_norm2(Var<Real> x) {
  Tape<Real>& tape = *x.tape;
  const std::size_t rows = x.rows(), cols = x.cols();
  const Buffer<Real>& xv = x.value();
  Buffer<Real> y = Buffer<Real>::matrix(rows, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    Real sq = 0;
    for (std::size_t c = 0; c < cols; ++c) sq += xv[r * cols + c] * xv[r * cols + c];
    y[r] = std::sqrt(sq);
    if (tape.tracking_branches()) tape.note_branch(branch_key(r, y[r] > Real(0)));
  }
  return tape.record("row_norm2", std::move(y), {x.id}, [xid = x.id, rows, cols](Tape<Real>& t, NodeId self) {
    const Buffer<Real>& yv = t.value(self);
    const Buffer<Real>& gy = t.grad(self);
    const Buffer<Real>& xv = t.value(xid);
    Buffer<Real>& gx = t.grad(xid);
    for (std::size_t r = 0; r < rows; ++r) {
      if (yv[r] == Real(0)) continue;
      const Real g = gy[r] / yv[r];
      for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += g * xv[r * cols + c];
    }
  });
}

#define MOVOX_INSTANTIATE_OPS(Real)                                                  \
  template Var<Real> linear<Real>(Var<Real>, Var<Real>, Var<Real>);                \
  template Var<Real> linear<Real>(Var<Real>, Var<Real>);                           \
  template Var<Real> relu<Real>(Var<Real>);                                        \
  template Var<Real> sigmoid<Real>(Var<Real>);                                     \
  template Var<Real> softplus<Real>(Var<Real>, Real);                              \
  template Var<Real> sin<Real>(Var<Real>);                                         \
  template Var<Real> cos<Real>(Var<Real>);                                         \
  template Var<Real> scale<Real>(Var<Real>, Real);                                 \
  template Var<Real> add<Real>(Var<Real>, Var<Real>);                              \
  template Var<Real> sub<Real>(Var<Real>, Var<Real>);                              \
  template Var<Real> mul<Real>(Var<Real>, Var<Real>);                              \
  template Var<Real> concat<Real>(std::span<const Var<Real>>);                     \
  template Var<Real> slice_cols<Real>(Var<Real>, std::size_t, std::size_t);        \
  template Var<Real> repeat_rows<Real>(Var<Real>, std::size_t);                    \
  template Var<Real> sum<Real>(Var<Real>);                                         \
  template Var<Real> l1<Real>(Var<Real>);                                          \
  template Var<Real> norm2<Real>(Var<Real>);                                       \
  template Var<Real> row_norm2<Real>(Var<Real>);

MOVOX_INSTANTIATE_OPS(float)
MOVOX_INSTANTIATE_OPS(double)

#undef MOVOX_INSTANTIATE_OPS

}  // namespace movox::diff
