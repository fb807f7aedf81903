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

#include "skimrnn/lstm.h"

#include <cmath>
#include <string>

#include "skimrnn/errors.h"

namespace skimrnn {

namespace {

void CheckLength(const char *what, size_t got, size_t want) {
  if (got != want) {
    throw DimensionError(std::string("lstm_step: ") + what + " has length " +
                         std::to_string(got) + ", expected " +
                         std::to_string(want));
  }
}

}  // namespace

LstmParams LstmParams::Zeros(size_t d_in, size_t d_out, size_t d_read) {
  LstmParams p;
  p.d_in = d_in;
  p.d_out = d_out;
  p.d_read = d_read;
  p.w = Tensor(Shape{4 * d_out, d_in + d_read});
  p.b = Tensor(Shape{4 * d_out});
  return p;
}

void LstmParams::Initialize(Rng &rng) {
  const size_t fan_in = input_width();
  const double s = fan_in > 0 ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 0.0;
  for (double &v : w.data()) v = rng.Uniform(-s, s);
  b.Fill(0.0);
  for (size_t i = d_out; i < 2 * d_out; ++i) b[i] = 1.0;
}

void LstmStep(const LstmParams &params, std::span<const double> x,
              std::span<const double> h_read, std::span<const double> c_prev,
              std::span<double> h_out, std::span<double> c_out,
              LstmWorkspace &ws, FlopCounter *counter) {
  const size_t d = params.d_out;
  CheckLength("x", x.size(), params.d_in);
  CheckLength("h_read", h_read.size(), params.d_read);
  CheckLength("c_prev", c_prev.size(), d);
  CheckLength("h_out", h_out.size(), d);
  CheckLength("c_out", c_out.size(), d);

  ws.xh.resize(params.input_width());
  ws.z.resize(4 * d);
  ws.gates.resize(4 * d);
  std::copy(x.begin(), x.end(), ws.xh.begin());
  std::copy(h_read.begin(), h_read.end(), ws.xh.begin() + params.d_in);

  std::span<double> z(ws.z);
  std::span<double> gates(ws.gates);
  kernels::MatVec(params.w.data(), 4 * d, params.input_width(), ws.xh, z,
                  counter);
  kernels::Add(z, params.b.data(), z, counter);
  kernels::Sigmoid(z.subspan(0, 3 * d), gates.subspan(0, 3 * d), counter);
  kernels::Tanh(z.subspan(3 * d, d), gates.subspan(3 * d, d), counter);

  auto in_gate = gates.subspan(0, d);
  auto forget = gates.subspan(d, d);
  auto out_gate = gates.subspan(2 * d, d);
  auto cand = gates.subspan(3 * d, d);
  // Reuse z as scratch: z[0:d] = f * c_prev, z[d:2d] = i * g.
  auto fc = z.subspan(0, d);
  auto ig = z.subspan(d, d);
  auto tc = z.subspan(2 * d, d);
  kernels::Mul(forget, c_prev, fc, counter);
  kernels::Mul(in_gate, cand, ig, counter);
  kernels::Add(fc, ig, c_out, counter);
  kernels::Tanh(c_out, tc, counter);
  kernels::Mul(out_gate, tc, h_out, counter);
}

LstmVars Bind(Tape &tape, LstmParams &params) {
  return LstmVars{&params, tape.Parameter(params.w), tape.Parameter(params.b)};
}

LstmVars BindConst(Tape &tape, const LstmParams &params) {
  return LstmVars{&params, tape.View(params.w), tape.View(params.b)};
}

LstmOutput LstmStep(Tape &tape, const LstmVars &vars, Var x, Var h_read,
                    Var c_prev) {
  const LstmParams &p = *vars.params;
  const size_t d = p.d_out;
  CheckLength("x", x.size(), p.d_in);
  CheckLength("h_read", h_read.size(), p.d_read);
  CheckLength("c_prev", c_prev.size(), d);

  Var z = tape.Add(tape.MatVec(vars.w, tape.Concat(x, h_read)), vars.b);
  Var gates = tape.Sigmoid(tape.Slice(z, 0, 3 * d));
  Var in_gate = tape.Slice(gates, 0, d);
  Var forget = tape.Slice(gates, d, 2 * d);
  Var out_gate = tape.Slice(gates, 2 * d, 3 * d);
  Var cand = tape.Tanh(tape.Slice(z, 3 * d, 4 * d));
  Var c = tape.Add(tape.Mul(forget, c_prev), tape.Mul(in_gate, cand));
  Var h = tape.Mul(out_gate, tape.Tanh(c));
  return LstmOutput{h, c};
}

}  // namespace skimrnn
