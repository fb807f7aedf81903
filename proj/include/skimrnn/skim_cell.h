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

#ifndef SKIMRNN_SKIM_CELL_H_
#define SKIMRNN_SKIM_CELL_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>

#include "skimrnn/kernels.h"
#include "skimrnn/lstm.h"
#include "skimrnn/random.h"
#include "skimrnn/tape.h"
#include "skimrnn/tensor.h"

namespace skimrnn {

// Number of choices of the decision network: read or skim.
inline constexpr size_t kNumChoices = 2;

// Probability floor applied before taking logs of decision probabilities.
inline constexpr double kProbFloor = 1e-12;

enum class Decision : uint8_t { kRead = 1, kSkim = 2 };

const char *DecisionName(Decision d);

// A Skim-LSTM unit: a big cell of width d, a small cell of width d_small
// that reads the full previous hidden state, and a two-way decision network
// over [x; h]. Row 0 of decision_w scores "read", row 1 scores "skim".
struct SkimUnitParams {
  size_t d_in = 0;
  size_t d = 0;
  size_t d_small = 0;
  LstmParams big;
  LstmParams small;
  Tensor decision_w;  // [2, d_in + d]
  Tensor decision_b;  // [2]

  // Zero weights. Requires d_small < d.
  static SkimUnitParams Zeros(size_t d_in, size_t d, size_t d_small);
  void Initialize(Rng &rng);
};

struct SkimState {
  Tensor h;
  Tensor c;

  static SkimState Zeros(size_t d) {
    return SkimState{Tensor(Shape{d}), Tensor(Shape{d})};
  }
  friend bool operator==(const SkimState &, const SkimState &) = default;
};

// How a hard step picks its decision from p = [p_read, p_skim].
struct SamplePolicy {
  Rng *rng = nullptr;
};
struct ArgmaxPolicy {};
struct ThresholdPolicy {
  double theta = 0.5;
};
struct ForcedPolicy {
  Decision decision = Decision::kRead;
};
using DecisionPolicy =
    std::variant<SamplePolicy, ArgmaxPolicy, ThresholdPolicy, ForcedPolicy>;

// Sample: read with probability p_read. Argmax: read unless p_skim is
// strictly larger. Threshold: read iff p_read >= theta. Forced: fixed.
Decision Decide(const DecisionPolicy &policy, std::span<const double> p);

// Throws ContractError for an out-of-range threshold or null sampler.
void ValidatePolicy(const DecisionPolicy &policy);

struct StepOutcome {
  SkimState state;
  std::array<double, kNumChoices> p{};
  std::optional<Decision> decision;  // hard steps
  std::optional<std::array<double, kNumChoices>> r;  // relaxed steps
  std::optional<std::array<double, kNumChoices>> gumbel_noise;
};

// Temperature annealing tau(n) = max(floor, exp(-rate * n)).
struct TemperatureSchedule {
  double rate = 1e-4;
  double floor = 0.5;

  double At(int64_t step) const;
};

// Gumbel(0, 1) from a uniform draw. u is clamped to [1e-12, 1 - 1e-12].
double GumbelFromUniform(double u);
double SampleGumbel(Rng &rng);

// r = softmax((log max(p, 1e-12) + g) / tau). Throws ContractError if
// tau <= 0.
std::array<double, kNumChoices> GumbelSoftmax(std::span<const double> p,
                                              std::span<const double> g,
                                              double tau);

struct SkimWorkspace {
  LstmWorkspace lstm;
  std::vector<double> xh;
  std::array<double, kNumChoices> z{};
};

// Raw decision probabilities softmax(decision_w [x; h] + decision_b).
std::array<double, kNumChoices> DecisionProbs(
    const SkimUnitParams &params, std::span<const double> x,
    std::span<const double> h, SkimWorkspace &ws,
    FlopCounter *counter = nullptr);
std::array<double, kNumChoices> DecisionProbs(const SkimUnitParams &params,
                                              std::span<const double> x,
                                              std::span<const double> h);

// Raw hard step updating (h, c) in place. Read runs the big cell on the full
// state. Skim runs the small cell on (x, h, c[0:d_small]) and overwrites only
// the leading d_small entries of h and c; with skip_on_skim the state is left
// untouched instead, as if d_small were 0. Returns the decision and writes
// the probabilities to *p when non-null.
Decision SkimStepHardInPlace(const SkimUnitParams &params,
                             std::span<const double> x, std::span<double> h,
                             std::span<double> c, const DecisionPolicy &policy,
                             SkimWorkspace &ws, FlopCounter *counter = nullptr,
                             std::array<double, kNumChoices> *p = nullptr,
                             bool skip_on_skim = false);

StepOutcome SkimStepHard(const SkimUnitParams &params,
                         std::span<const double> x, const SkimState &state,
                         const DecisionPolicy &policy);

// Unrecorded relaxed step on plain values; mirrors the recorded version.
StepOutcome SkimStepRelaxed(const SkimUnitParams &params,
                            std::span<const double> x, const SkimState &state,
                            double tau, std::span<const double> noise);
StepOutcome SkimStepRelaxed(const SkimUnitParams &params,
                            std::span<const double> x, const SkimState &state,
                            double tau, Rng &rng);

// ---- Recorded (differentiable) versions ----

struct SkimUnitVars {
  const SkimUnitParams *params = nullptr;
  LstmVars big;
  LstmVars small;
  Var decision_w;
  Var decision_b;
};

SkimUnitVars Bind(Tape &tape, SkimUnitParams &params);
SkimUnitVars BindConst(Tape &tape, const SkimUnitParams &params);

struct TapeState {
  Var h;
  Var c;
};

struct TapeStep {
  TapeState state;
  Var p;  // [p_read, p_skim]
  std::optional<Decision> decision;
  std::optional<Var> r;
  std::array<double, kNumChoices> noise{};
};

Var DecisionProbs(Tape &tape, const SkimUnitVars &vars, Var x, Var h);

Var GumbelSoftmax(Tape &tape, Var p, std::span<const double> noise, double tau);

// Hard step with a fixed decision. The decision network is still evaluated
// (for p) but does not feed the new state.
TapeStep SkimStepHard(Tape &tape, const SkimUnitVars &vars, Var x,
                      TapeState state, Decision decision);

// Hard step whose decision comes from policy applied to its own p. With
// skip_on_skim a Skim step returns the incoming state.
TapeStep SkimStepHard(Tape &tape, const SkimUnitVars &vars, Var x,
                      TapeState state, const DecisionPolicy &policy,
                      bool skip_on_skim = false);

// Relaxed step: both candidate states blended by r, applied to h and c.
TapeStep SkimStepRelaxed(Tape &tape, const SkimUnitVars &vars, Var x,
                         TapeState state, double tau,
                         std::span<const double> noise);

}  // namespace skimrnn

#endif  // SKIMRNN_SKIM_CELL_H_
