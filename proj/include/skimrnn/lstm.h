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

#ifndef SKIMRNN_LSTM_H_
#define SKIMRNN_LSTM_H_

#include <cstddef>
#include <span>
#include <vector>

#include "skimrnn/kernels.h"
#include "skimrnn/random.h"
#include "skimrnn/tape.h"
#include "skimrnn/tensor.h"

namespace skimrnn {

// Weights of one LSTM cell. The gate pre-activations are
//   z = w * [x; h_read] + b
// stacked in the order (i, f, o, g), each block d_out rows tall. The cell
// reads a hidden vector of width d_read, which may differ from d_out.
struct LstmParams {
  size_t d_in = 0;
  size_t d_out = 0;
  size_t d_read = 0;
  Tensor w;  // [4 * d_out, d_in + d_read]
  Tensor b;  // [4 * d_out]

  // Zero weights of the right shapes.
  static LstmParams Zeros(size_t d_in, size_t d_out, size_t d_read);

  // Uniform(-s, s) weights with s = 1 / sqrt(d_in + d_read), zero biases
  // except the forget block, which starts at 1.
  void Initialize(Rng &rng);

  size_t input_width() const { return d_in + d_read; }
};

// Scratch buffers for the raw step so tight loops do not allocate.
struct LstmWorkspace {
  std::vector<double> xh;
  std::vector<double> z;
  std::vector<double> gates;
};

// Raw (unrecorded) LSTM step. h_out and c_out may alias h_read and c_prev.
// Throws DimensionError when a span length disagrees with params.
void LstmStep(const LstmParams &params, std::span<const double> x,
              std::span<const double> h_read, std::span<const double> c_prev,
              std::span<double> h_out, std::span<double> c_out,
              LstmWorkspace &ws, FlopCounter *counter = nullptr);

// Parameter tensors bound onto a tape.
struct LstmVars {
  const LstmParams *params = nullptr;
  Var w;
  Var b;
};

LstmVars Bind(Tape &tape, LstmParams &params);
// Read-only binding; no gradients flow into params.
LstmVars BindConst(Tape &tape, const LstmParams &params);

struct LstmOutput {
  Var h;
  Var c;
};

// Recorded LSTM step. Bitwise identical forward values to the raw step.
LstmOutput LstmStep(Tape &tape, const LstmVars &vars, Var x, Var h_read,
                    Var c_prev);

}  // namespace skimrnn

#endif  // SKIMRNN_LSTM_H_
