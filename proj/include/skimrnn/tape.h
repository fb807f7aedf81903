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

#ifndef SKIMRNN_TAPE_H_
#define SKIMRNN_TAPE_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "skimrnn/tensor.h"

namespace skimrnn {

class Tape;

// Handle to a value recorded on a Tape.
struct Var {
  Tape *tape = nullptr;
  int32_t id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  std::span<const double> value() const;
  const Shape &shape() const;
  size_t size() const { return value().size(); }
  double scalar() const { return value()[0]; }
};

// Computation record for reverse-mode differentiation. Every primitive
// appends one node; Backward() replays the adjoints in exact reverse append
// order, which also fixes the gradient accumulation order.
//
// A tape is confined to one thread. Parameters referenced through
// Parameter() are read-only during the forward pass; their gradients are
// accumulated into Tensor::grad() by Backward().
class Tape {
 public:
  enum class Op : uint8_t {
    kConstant,
    kInput,
    kParameter,
    kMatVec,
    kAdd,
    kSub,
    kMul,
    kSigmoid,
    kTanh,
    kLog,
    kExp,
    kNeg,
    kScale,
    kScaleBy,
    kSoftmax,
    kLogSoftmax,
    kConcat,
    kSlice,
    kSum,
    kDot,
    kClampMin,
    kRow,
  };

  Tape() = default;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  // Leaf that never receives a gradient.
  Var Constant(Tensor value);
  Var Constant(std::span<const double> values);
  // Leaf whose gradient is kept on the tape (see Grad()).
  Var Input(Tensor value);
  // Leaf bound to an external tensor; gradients accumulate into t.grad().
  Var Parameter(Tensor &t);
  // Leaf reading an external tensor without copying; never receives a
  // gradient. The tensor must outlive the tape's use of it.
  Var View(const Tensor &t);

  std::span<const double> Value(Var v) const;
  const Shape &ShapeOf(Var v) const { return nodes_[v.id].shape; }
  // Gradient of an Input leaf or intermediate after Backward().
  std::span<const double> Grad(Var v) const;

  // Seeds d(loss)/d(loss) = 1 and propagates to every reachable leaf.
  void Backward(Var loss);

  // Operations recorded so far, in append order.
  size_t size() const { return nodes_.size(); }
  Op op(size_t i) const { return nodes_[i].op; }
  // Node ids visited by the last Backward(), in visit order.
  const std::vector<int32_t> &last_visit_order() const { return visited_; }

  void Clear();

  // Primitives. Operands must live on this tape.
  Var MatVec(Var m, Var v);
  Var Add(Var a, Var b);
  Var Sub(Var a, Var b);
  Var Mul(Var a, Var b);
  Var Sigmoid(Var a);
  Var Tanh(Var a);
  Var Log(Var a);
  Var Exp(Var a);
  Var Neg(Var a);
  Var Scale(Var a, double c);
  Var ScaleBy(Var a, Var s);
  Var Softmax(Var z);
  Var LogSoftmax(Var z);
  Var Concat(Var a, Var b);
  Var Concat(std::span<const Var> parts);
  Var Slice(Var a, size_t lo, size_t hi);
  Var Sum(Var a);
  Var Dot(Var a, Var b);
  Var ClampMin(Var a, double lo);
  Var Row(Var m, size_t row);

 private:
  struct Node {
    Op op = Op::kConstant;
    int32_t a = -1;
    int32_t b = -1;
    size_t lo = 0;
    size_t hi = 0;
    double scalar = 0.0;
    bool requires_grad = false;
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<int32_t> inputs;
    const Tensor *external = nullptr;
    Tensor *param = nullptr;
  };

  Var Push(Node node);
  Node MakeNode(Op op, Shape shape, std::initializer_list<Var> inputs);
  void Check(Var v) const;
  std::span<double> GradOf(int32_t id);
  void BackwardNode(int32_t id);

  std::vector<Node> nodes_;
  std::vector<int32_t> visited_;
  std::vector<char> reached_;
};

}  // namespace skimrnn

#endif  // SKIMRNN_TAPE_H_
