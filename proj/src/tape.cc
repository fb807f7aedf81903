// Copyright 2026 The Skim-RNN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "skimrnn/tape.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "skimrnn/errors.h"
#include "skimrnn/kernels.h"

namespace skimrnn {

namespace {

void RequireSameShape(const char *op, const Shape &a, const Shape &b) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         ShapeToString(a) + " vs " + ShapeToString(b));
  }
}

}  // namespace

std::span<const double> Var::value() const { return tape->Value(*this); }

const Shape &Var::shape() const { return tape->ShapeOf(*this); }

void Tape::Check(Var v) const {
  if (v.tape != this || v.id < 0 || static_cast<size_t>(v.id) >= nodes_.size()) {
    throw ContractError("variable does not belong to this tape");
  }
}

Var Tape::Push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int32_t>(nodes_.size() - 1)};
}

Tape::Node Tape::MakeNode(Op op, Shape shape, std::initializer_list<Var> inputs) {
  Node node;
  node.op = op;
  int k = 0;
  for (Var v : inputs) {
    Check(v);
    if (k == 0) node.a = v.id;
    if (k == 1) node.b = v.id;
    node.requires_grad = node.requires_grad || nodes_[v.id].requires_grad;
    ++k;
  }
  node.value.assign(ShapeSize(shape), 0.0);
  node.shape = std::move(shape);
  return node;
}

Var Tape::Constant(Tensor value) {
  Node node;
  node.op = Op::kConstant;
  node.shape = value.shape();
  node.value.assign(value.data().begin(), value.data().end());
  return Push(std::move(node));
}

Var Tape::Constant(std::span<const double> values) {
  Node node;
  node.op = Op::kConstant;
  node.shape = Shape{values.size()};
  node.value.assign(values.begin(), values.end());
  return Push(std::move(node));
}

Var Tape::Input(Tensor value) {
  Var v = Constant(std::move(value));
  nodes_[v.id].op = Op::kInput;
  nodes_[v.id].requires_grad = true;
  return v;
}

Var Tape::Parameter(Tensor &t) {
  t.EnableGrad();
  Node node;
  node.op = Op::kParameter;
  node.shape = t.shape();
  node.external = &t;
  node.param = &t;
  node.requires_grad = true;
  return Push(std::move(node));
}

Var Tape::View(const Tensor &t) {
  Node node;
  node.op = Op::kConstant;
  node.shape = t.shape();
  node.external = &t;
  return Push(std::move(node));
}

std::span<const double> Tape::Value(Var v) const {
  Check(v);
  const Node &n = nodes_[v.id];
  if (n.external != nullptr) return n.external->data();
  return n.value;
}

std::span<const double> Tape::Grad(Var v) const {
  Check(v);
  const Node &n = nodes_[v.id];
  if (n.param != nullptr) return n.param->grad();
  return n.grad;
}

std::span<double> Tape::GradOf(int32_t id) {
  Node &n = nodes_[id];
  if (n.param != nullptr) return n.param->grad();
  if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Tape::Clear() {
  nodes_.clear();
  visited_.clear();
  reached_.clear();
}

Var Tape::MatVec(Var m, Var v) {
  Check(m);
  Check(v);
  const Shape &ms = nodes_[m.id].shape;
  const Shape &vs = nodes_[v.id].shape;
  if (ms.size() != 2 || vs.size() != 1 || ms[1] != vs[0]) {
    throw DimensionError("matvec: cannot multiply " + ShapeToString(ms) +
                         " by " + ShapeToString(vs));
  }
  Node node = MakeNode(Op::kMatVec, Shape{ms[0]}, {m, v});
  kernels::MatVec(Value(m), ms[0], ms[1], Value(v), node.value);
  return Push(std::move(node));
}

Var Tape::Add(Var a, Var b) {
  Check(a);
  Check(b);
  RequireSameShape("add", nodes_[a.id].shape, nodes_[b.id].shape);
  Node node = MakeNode(Op::kAdd, nodes_[a.id].shape, {a, b});
  kernels::Add(Value(a), Value(b), node.value);
  return Push(std::move(node));
}

Var Tape::Sub(Var a, Var b) {
  Check(a);
  Check(b);
  RequireSameShape("sub", nodes_[a.id].shape, nodes_[b.id].shape);
  Node node = MakeNode(Op::kSub, nodes_[a.id].shape, {a, b});
  auto x = Value(a);
  auto y = Value(b);
  for (size_t i = 0; i < node.value.size(); ++i) node.value[i] = x[i] - y[i];
  return Push(std::move(node));
}

Var Tape::Mul(Var a, Var b) {
  Check(a);
  Check(b);
  RequireSameShape("mul", nodes_[a.id].shape, nodes_[b.id].shape);
  Node node = MakeNode(Op::kMul, nodes_[a.id].shape, {a, b});
  kernels::Mul(Value(a), Value(b), node.value);
  return Push(std::move(node));
}

Var Tape::Sigmoid(Var a) {
  Check(a);
  Node node = MakeNode(Op::kSigmoid, nodes_[a.id].shape, {a});
  kernels::Sigmoid(Value(a), node.value);
  return Push(std::move(node));
}

Var Tape::Tanh(Var a) {
  Check(a);
  Node node = MakeNode(Op::kTanh, nodes_[a.id].shape, {a});
  kernels::Tanh(Value(a), node.value);
  return Push(std::move(node));
}

Var Tape::Log(Var a) {
  Check(a);
  Node node = MakeNode(Op::kLog, nodes_[a.id].shape, {a});
  auto x = Value(a);
  for (size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0)) {
      throw DomainError("log: non-positive input " + std::to_string(x[i]) +
                        " at index " + std::to_string(i));
    }
    node.value[i] = std::log(x[i]);
  }
  return Push(std::move(node));
}

Var Tape::Exp(Var a) {
  Check(a);
  Node node = MakeNode(Op::kExp, nodes_[a.id].shape, {a});
  auto x = Value(a);
  for (size_t i = 0; i < x.size(); ++i) node.value[i] = std::exp(x[i]);
  return Push(std::move(node));
}

Var Tape::Neg(Var a) {
  Check(a);
  Node node = MakeNode(Op::kNeg, nodes_[a.id].shape, {a});
  auto x = Value(a);
  for (size_t i = 0; i < x.size(); ++i) node.value[i] = -x[i];
  return Push(std::move(node));
}

Var Tape::Scale(Var a, double c) {
  Check(a);
  Node node = MakeNode(Op::kScale, nodes_[a.id].shape, {a});
  node.scalar = c;
  auto x = Value(a);
  for (size_t i = 0; i < x.size(); ++i) node.value[i] = c * x[i];
  return Push(std::move(node));
}

Var Tape::ScaleBy(Var a, Var s) {
  Check(a);
  Check(s);
  if (Value(s).size() != 1) {
    throw DimensionError("scale_by: scale factor must have one element, got " +
                         ShapeToString(nodes_[s.id].shape));
  }
  Node node = MakeNode(Op::kScaleBy, nodes_[a.id].shape, {a, s});
  const double c = Value(s)[0];
  auto x = Value(a);
  for (size_t i = 0; i < x.size(); ++i) node.value[i] = c * x[i];
  return Push(std::move(node));
}

Var Tape::Softmax(Var z) {
  Check(z);
  if (Value(z).empty()) throw DimensionError("softmax: empty input");
  Node node = MakeNode(Op::kSoftmax, nodes_[z.id].shape, {z});
  kernels::Softmax(Value(z), node.value);
  return Push(std::move(node));
}

Var Tape::LogSoftmax(Var z) {
  Check(z);
  if (Value(z).empty()) throw DimensionError("log_softmax: empty input");
  Node node = MakeNode(Op::kLogSoftmax, nodes_[z.id].shape, {z});
  kernels::LogSoftmax(Value(z), node.value);
  return Push(std::move(node));
}

Var Tape::Concat(Var a, Var b) {
  const Var parts[] = {a, b};
  return Concat(parts);
}

Var Tape::Concat(std::span<const Var> parts) {
  size_t total = 0;
  for (Var p : parts) {
    Check(p);
    if (nodes_[p.id].shape.size() > 1) {
      throw DimensionError("concat: expected vectors, got " +
                           ShapeToString(nodes_[p.id].shape));
    }
    total += Value(p).size();
  }
  Node node = MakeNode(Op::kConcat, Shape{total}, {});
  size_t offset = 0;
  for (Var p : parts) {
    auto x = Value(p);
    std::copy(x.begin(), x.end(), node.value.begin() + offset);
    offset += x.size();
    node.inputs.push_back(p.id);
    node.requires_grad = node.requires_grad || nodes_[p.id].requires_grad;
  }
  return Push(std::move(node));
}

Var Tape::Slice(Var a, size_t lo, size_t hi) {
  Check(a);
  const size_t n = Value(a).size();
  if (lo > hi || hi > n) {
    throw IndexError("slice: range [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + ") out of bounds for length " +
                     std::to_string(n));
  }
  Node node = MakeNode(Op::kSlice, Shape{hi - lo}, {a});
  node.lo = lo;
  node.hi = hi;
  auto x = Value(a);
  std::copy(x.begin() + lo, x.begin() + hi, node.value.begin());
  return Push(std::move(node));
}

Var Tape::Sum(Var a) {
  Check(a);
  Node node = MakeNode(Op::kSum, Shape{}, {a});
  double s = 0.0;
  for (double x : Value(a)) s += x;
  node.value[0] = s;
  return Push(std::move(node));
}

Var Tape::Dot(Var a, Var b) {
  Check(a);
  Check(b);
  if (Value(a).size() != Value(b).size()) {
    throw DimensionError("dot: shape mismatch " +
                         ShapeToString(nodes_[a.id].shape) + " vs " +
                         ShapeToString(nodes_[b.id].shape));
  }
  Node node = MakeNode(Op::kDot, Shape{}, {a, b});
  node.value[0] = kernels::Dot(Value(a).data(), Value(b).data(), Value(a).size());
  return Push(std::move(node));
}

Var Tape::ClampMin(Var a, double lo) {
  Check(a);
  Node node = MakeNode(Op::kClampMin, nodes_[a.id].shape, {a});
  node.scalar = lo;
  auto x = Value(a);
  for (size_t i = 0; i < x.size(); ++i) node.value[i] = std::max(x[i], lo);
  return Push(std::move(node));
}

Var Tape::Row(Var m, size_t row) {
  Check(m);
  const Shape &ms = nodes_[m.id].shape;
  if (ms.size() != 2) {
    throw DimensionError("row: expected matrix, got " + ShapeToString(ms));
  }
  if (row >= ms[0]) {
    throw IndexError("row: index " + std::to_string(row) +
                     " out of bounds for " + ShapeToString(ms));
  }
  Node node = MakeNode(Op::kRow, Shape{ms[1]}, {m});
  node.lo = row;
  auto x = Value(m);
  std::copy(x.begin() + row * ms[1], x.begin() + (row + 1) * ms[1],
            node.value.begin());
  return Push(std::move(node));
}

void Tape::Backward(Var loss) {
  Check(loss);
  if (Value(loss).size() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " +
                        ShapeToString(nodes_[loss.id].shape));
  }
  for (Node &n : nodes_) {
    if (n.param == nullptr) n.grad.clear();
  }
  reached_.assign(nodes_.size(), 0);
  visited_.clear();
  GradOf(loss.id)[0] += 1.0;
  reached_[loss.id] = 1;
  for (int32_t id = loss.id; id >= 0; --id) {
    if (!reached_[id] || !nodes_[id].requires_grad) continue;
    visited_.push_back(id);
    BackwardNode(id);
  }
}

void Tape::BackwardNode(int32_t id) {
  // Copy out what we need; GradOf() on inputs never touches this node.
  const Node &n = nodes_[id];
  const std::span<const double> g = n.grad;
  const std::span<const double> y = n.value;

  auto wants = [&](int32_t in) {
    if (in < 0 || !nodes_[in].requires_grad) return false;
    reached_[in] = 1;
    return true;
  };

  switch (n.op) {
    case Op::kConstant:
    case Op::kInput:
    case Op::kParameter:
      break;
    case Op::kMatVec: {
      const size_t rows = nodes_[n.a].shape[0];
      const size_t cols = nodes_[n.a].shape[1];
      auto m = Value(Var{this, n.a});
      auto v = Value(Var{this, n.b});
      if (wants(n.b)) {
        auto dv = GradOf(n.b);
        for (size_t i = 0; i < rows; ++i) {
          const double gi = g[i];
          const double *row = m.data() + i * cols;
          for (size_t j = 0; j < cols; ++j) dv[j] += row[j] * gi;
        }
      }
      if (wants(n.a)) {
        auto dm = GradOf(n.a);
        for (size_t i = 0; i < rows; ++i) {
          const double gi = g[i];
          double *row = dm.data() + i * cols;
          for (size_t j = 0; j < cols; ++j) row[j] += gi * v[j];
        }
      }
      break;
    }
    case Op::kAdd:
    case Op::kSub: {
      const double sign = n.op == Op::kSub ? -1.0 : 1.0;
      if (wants(n.a)) {
        auto da = GradOf(n.a);
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i];
      }
      if (wants(n.b)) {
        auto db = GradOf(n.b);
        for (size_t i = 0; i < g.size(); ++i) db[i] += sign * g[i];
      }
      break;
    }
    case Op::kMul: {
      auto x = Value(Var{this, n.a});
      auto z = Value(Var{this, n.b});
      if (wants(n.a)) {
        auto da = GradOf(n.a);
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] * z[i];
      }
      if (wants(n.b)) {
        auto db = GradOf(n.b);
        for (size_t i = 0; i < g.size(); ++i) db[i] += g[i] * x[i];
      }
      break;
    }
    case Op::kSigmoid:
      if (wants(n.a)) {
        auto da = GradOf(n.a);
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] * y[i] * (1.0 - y[i]);
      }
      break;
    case Op::kTanh:
      if (wants(n.a)) {
        auto da = GradOf(n.a);
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] * (1.0 - y[i] * y[i]);
      }
      break;
    case Op::kLog:
      if (wants(n.a)) {
        auto x = Value(Var{this, n.a});
        auto da = GradOf(n.a);
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] / x[i];
      }
      break;
    case Op::kExp:
      if (wants(n.a)) {
        auto da = GradOf(n.a);
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] * y[i];
      }
      break;
    case Op::kNeg:
      if (wants(n.a)) {
        auto da = GradOf(n.a);
        for (size_t i = 0; i < g.size(); ++i) da[i] -= g[i];
      }
      break;
    case Op::kScale:
      if (wants(n.a)) {
        auto da = GradOf(n.a);
        for (size_t i = 0; i < g.size(); ++i) da[i] += n.scalar * g[i];
      }
      break;
    case Op::kScaleBy: {
      auto x = Value(Var{this, n.a});
      const double c = Value(Var{this, n.b})[0];
      if (wants(n.a)) {
        auto da = GradOf(n.a);
        for (size_t i = 0; i < g.size(); ++i) da[i] += c * g[i];
      }
      if (wants(n.b)) {
        double s = 0.0;
        for (size_t i = 0; i < g.size(); ++i) s += g[i] * x[i];
        GradOf(n.b)[0] += s;
      }
      break;
    }
    case Op::kSoftmax:
      if (wants(n.a)) {
        double gy = 0.0;
        for (size_t i = 0; i < g.size(); ++i) gy += g[i] * y[i];
        auto da = GradOf(n.a);
        for (size_t i = 0; i < g.size(); ++i) da[i] += y[i] * (g[i] - gy);
      }
      break;
    case Op::kLogSoftmax:
      if (wants(n.a)) {
        double gs = 0.0;
        for (double gi : g) gs += gi;
        auto da = GradOf(n.a);
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] - std::exp(y[i]) * gs;
      }
      break;
    case Op::kConcat: {
      size_t offset = 0;
      for (int32_t in : n.inputs) {
        const size_t len = nodes_[in].external != nullptr
                               ? nodes_[in].external->size()
                               : nodes_[in].value.size();
        if (wants(in)) {
          auto da = GradOf(in);
          for (size_t i = 0; i < len; ++i) da[i] += g[offset + i];
        }
        offset += len;
      }
      break;
    }
    case Op::kSlice:
      if (wants(n.a)) {
        auto da = GradOf(n.a);
        for (size_t i = 0; i < g.size(); ++i) da[n.lo + i] += g[i];
      }
      break;
    case Op::kSum:
      if (wants(n.a)) {
        auto da = GradOf(n.a);
        for (double &d : da) d += g[0];
      }
      break;
    case Op::kDot: {
      auto x = Value(Var{this, n.a});
      auto z = Value(Var{this, n.b});
      if (wants(n.a)) {
        auto da = GradOf(n.a);
        for (size_t i = 0; i < x.size(); ++i) da[i] += g[0] * z[i];
      }
      if (wants(n.b)) {
        auto db = GradOf(n.b);
        for (size_t i = 0; i < z.size(); ++i) db[i] += g[0] * x[i];
      }
      break;
    }
    case Op::kClampMin:
      if (wants(n.a)) {
        auto x = Value(Var{this, n.a});
        auto da = GradOf(n.a);
        for (size_t i = 0; i < g.size(); ++i) {
          if (x[i] >= n.scalar) da[i] += g[i];
        }
      }
      break;
    case Op::kRow:
      if (wants(n.a)) {
        auto dm = GradOf(n.a);
        const size_t offset = n.lo * g.size();
        for (size_t i = 0; i < g.size(); ++i) dm[offset + i] += g[i];
      }
      break;
  }
}

}  // namespace skimrnn
