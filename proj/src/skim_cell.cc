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

#include "skimrnn/skim_cell.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "skimrnn/errors.h"

namespace skimrnn {

const char *DecisionName(Decision d) {
  return d == Decision::kRead ? "read" : "skim";
}

SkimUnitParams SkimUnitParams::Zeros(size_t d_in, size_t d, size_t d_small) {
  if (d_small >= d) {
    throw ContractError("skim unit: small width " + std::to_string(d_small) +
                        " must be less than big width " + std::to_string(d));
  }
  SkimUnitParams p;
  p.d_in = d_in;
  p.d = d;
  p.d_small = d_small;
  p.big = LstmParams::Zeros(d_in, d, d);
  p.small = LstmParams::Zeros(d_in, d_small, d);
  p.decision_w = Tensor(Shape{kNumChoices, d_in + d});
  p.decision_b = Tensor(Shape{kNumChoices});
  return p;
}

void SkimUnitParams::Initialize(Rng &rng) {
  big.Initialize(rng);
  small.Initialize(rng);
  const double s = 1.0 / std::sqrt(static_cast<double>(d_in + d));
  for (double &v : decision_w.data()) v = rng.Uniform(-s, s);
  decision_b.Fill(0.0);
}

void ValidatePolicy(const DecisionPolicy &policy) {
  if (const auto *t = std::get_if<ThresholdPolicy>(&policy)) {
    if (!(t->theta >= 0.0 && t->theta <= 1.0)) {
      throw ContractError("threshold must lie in [0, 1], got " +
                          std::to_string(t->theta));
    }
  }
  if (const auto *s = std::get_if<SamplePolicy>(&policy)) {
    if (s->rng == nullptr) throw ContractError("sample policy needs an rng");
  }
}

Decision Decide(const DecisionPolicy &policy, std::span<const double> p) {
  struct Visitor {
    std::span<const double> p;
    Decision operator()(const SamplePolicy &s) const {
      return s.rng->Uniform() < p[0] ? Decision::kRead : Decision::kSkim;
    }
    Decision operator()(const ArgmaxPolicy &) const {
      return p[0] >= p[1] ? Decision::kRead : Decision::kSkim;
    }
    Decision operator()(const ThresholdPolicy &t) const {
      return p[0] >= t.theta ? Decision::kRead : Decision::kSkim;
    }
    Decision operator()(const ForcedPolicy &f) const { return f.decision; }
  };
  return std::visit(Visitor{p}, policy);
}

double TemperatureSchedule::At(int64_t step) const {
  return std::max(floor, std::exp(-rate * static_cast<double>(step)));
}

double GumbelFromUniform(double u) {
  u = std::clamp(u, kProbFloor, 1.0 - kProbFloor);
  return -std::log(-std::log(u));
}

double SampleGumbel(Rng &rng) { return GumbelFromUniform(rng.Uniform()); }

std::array<double, kNumChoices> GumbelSoftmax(std::span<const double> p,
                                              std::span<const double> g,
                                              double tau) {
  if (!(tau > 0.0)) {
    throw ContractError("gumbel_softmax: temperature must be positive, got " +
                        std::to_string(tau));
  }
  if (p.size() != kNumChoices || g.size() != kNumChoices) {
    throw DimensionError("gumbel_softmax: expected " +
                         std::to_string(kNumChoices) + " choices");
  }
  std::array<double, kNumChoices> logits{};
  for (size_t i = 0; i < kNumChoices; ++i) {
    logits[i] = (std::log(std::max(p[i], kProbFloor)) + g[i]) * (1.0 / tau);
  }
  std::array<double, kNumChoices> r{};
  kernels::Softmax(logits, r);
  return r;
}

std::array<double, kNumChoices> DecisionProbs(
    const SkimUnitParams &params, std::span<const double> x,
    std::span<const double> h, SkimWorkspace &ws, FlopCounter *counter) {
  if (x.size() != params.d_in || h.size() != params.d) {
    throw DimensionError("decision_probs: got x of length " +
                         std::to_string(x.size()) + " and h of length " +
                         std::to_string(h.size()) + ", expected " +
                         std::to_string(params.d_in) + " and " +
                         std::to_string(params.d));
  }
  ws.xh.resize(params.d_in + params.d);
  std::copy(x.begin(), x.end(), ws.xh.begin());
  std::copy(h.begin(), h.end(), ws.xh.begin() + params.d_in);
  kernels::MatVec(params.decision_w.data(), kNumChoices, ws.xh.size(), ws.xh,
                  ws.z, counter);
  kernels::Add(ws.z, params.decision_b.data(), ws.z, counter);
  std::array<double, kNumChoices> p{};
  kernels::Softmax(ws.z, p, counter);
  return p;
}

std::array<double, kNumChoices> DecisionProbs(const SkimUnitParams &params,
                                              std::span<const double> x,
                                              std::span<const double> h) {
  SkimWorkspace ws;
  return DecisionProbs(params, x, h, ws);
}

Decision SkimStepHardInPlace(const SkimUnitParams &params,
                             std::span<const double> x, std::span<double> h,
                             std::span<double> c, const DecisionPolicy &policy,
                             SkimWorkspace &ws, FlopCounter *counter,
                             std::array<double, kNumChoices> *p,
                             bool skip_on_skim) {
  if (c.size() != params.d) {
    throw DimensionError("skim_step: c has length " + std::to_string(c.size()) +
                         ", expected " + std::to_string(params.d));
  }
  const auto probs = DecisionProbs(params, x, h, ws, counter);
  if (p != nullptr) *p = probs;
  const Decision decision = Decide(policy, probs);
  if (decision == Decision::kRead) {
    LstmStep(params.big, x, h, c, h, c, ws.lstm, counter);
  } else if (!skip_on_skim) {
    const size_t ds = params.d_small;
    LstmStep(params.small, x, h, c.subspan(0, ds), h.subspan(0, ds),
             c.subspan(0, ds), ws.lstm, counter);
  }
  return decision;
}

StepOutcome SkimStepHard(const SkimUnitParams &params,
                         std::span<const double> x, const SkimState &state,
                         const DecisionPolicy &policy) {
  ValidatePolicy(policy);
  StepOutcome out;
  out.state = state;
  SkimWorkspace ws;
  out.decision = SkimStepHardInPlace(params, x, out.state.h.data(),
                                     out.state.c.data(), policy, ws, nullptr,
                                     &out.p);
  return out;
}

StepOutcome SkimStepRelaxed(const SkimUnitParams &params,
                            std::span<const double> x, const SkimState &state,
                            double tau, std::span<const double> noise) {
  Tape tape;
  SkimUnitVars vars = BindConst(tape, params);
  TapeState ts{tape.Constant(state.h.data()), tape.Constant(state.c.data())};
  TapeStep step = SkimStepRelaxed(tape, vars, tape.Constant(x), ts, tau, noise);

  StepOutcome out;
  out.state.h = Tensor::Vector({step.state.h.value().begin(),
                                step.state.h.value().end()});
  out.state.c = Tensor::Vector({step.state.c.value().begin(),
                                step.state.c.value().end()});
  std::copy_n(step.p.value().begin(), kNumChoices, out.p.begin());
  std::array<double, kNumChoices> r{};
  std::copy_n(step.r->value().begin(), kNumChoices, r.begin());
  out.r = r;
  out.gumbel_noise = step.noise;
  return out;
}

StepOutcome SkimStepRelaxed(const SkimUnitParams &params,
                            std::span<const double> x, const SkimState &state,
                            double tau, Rng &rng) {
  std::array<double, kNumChoices> noise{};
  for (double &g : noise) g = SampleGumbel(rng);
  return SkimStepRelaxed(params, x, state, tau, noise);
}

SkimUnitVars Bind(Tape &tape, SkimUnitParams &params) {
  SkimUnitVars vars;
  vars.params = &params;
  vars.big = Bind(tape, params.big);
  vars.small = Bind(tape, params.small);
  vars.decision_w = tape.Parameter(params.decision_w);
  vars.decision_b = tape.Parameter(params.decision_b);
  return vars;
}

SkimUnitVars BindConst(Tape &tape, const SkimUnitParams &params) {
  SkimUnitVars vars;
  vars.params = &params;
  vars.big = BindConst(tape, params.big);
  vars.small = BindConst(tape, params.small);
  vars.decision_w = tape.View(params.decision_w);
  vars.decision_b = tape.View(params.decision_b);
  return vars;
}

Var DecisionProbs(Tape &tape, const SkimUnitVars &vars, Var x, Var h) {
  Var z = tape.Add(tape.MatVec(vars.decision_w, tape.Concat(x, h)),
                   vars.decision_b);
  return tape.Softmax(z);
}

Var GumbelSoftmax(Tape &tape, Var p, std::span<const double> noise,
                  double tau) {
  if (!(tau > 0.0)) {
    throw ContractError("gumbel_softmax: temperature must be positive, got " +
                        std::to_string(tau));
  }
  Var logits = tape.Add(tape.Log(tape.ClampMin(p, kProbFloor)),
                        tape.Constant(noise));
  return tape.Softmax(tape.Scale(logits, 1.0 / tau));
}

namespace {

// Small-cell candidate: [f'(x, h, c[0:d']); h[d':d]] and likewise for c.
TapeState SkimCandidate(Tape &tape, const SkimUnitVars &vars, Var x,
                        TapeState state) {
  const size_t d = vars.params->d;
  const size_t ds = vars.params->d_small;
  LstmOutput small = LstmStep(tape, vars.small, x, state.h,
                              tape.Slice(state.c, 0, ds));
  return TapeState{tape.Concat(small.h, tape.Slice(state.h, ds, d)),
                   tape.Concat(small.c, tape.Slice(state.c, ds, d))};
}

}  // namespace

TapeStep SkimStepHard(Tape &tape, const SkimUnitVars &vars, Var x,
                      TapeState state, Decision decision) {
  TapeStep step;
  step.p = DecisionProbs(tape, vars, x, state.h);
  step.decision = decision;
  if (decision == Decision::kRead) {
    LstmOutput big = LstmStep(tape, vars.big, x, state.h, state.c);
    step.state = TapeState{big.h, big.c};
  } else {
    step.state = SkimCandidate(tape, vars, x, state);
  }
  return step;
}

TapeStep SkimStepHard(Tape &tape, const SkimUnitVars &vars, Var x,
                      TapeState state, const DecisionPolicy &policy,
                      bool skip_on_skim) {
  TapeStep step;
  step.p = DecisionProbs(tape, vars, x, state.h);
  const Decision decision = Decide(policy, step.p.value());
  step.decision = decision;
  if (decision == Decision::kRead) {
    LstmOutput big = LstmStep(tape, vars.big, x, state.h, state.c);
    step.state = TapeState{big.h, big.c};
  } else if (skip_on_skim) {
    step.state = state;
  } else {
    step.state = SkimCandidate(tape, vars, x, state);
  }
  return step;
}

TapeStep SkimStepRelaxed(Tape &tape, const SkimUnitVars &vars, Var x,
                         TapeState state, double tau,
                         std::span<const double> noise) {
  if (noise.size() != kNumChoices) {
    throw DimensionError("skim_step_relaxed: expected " +
                         std::to_string(kNumChoices) + " noise values");
  }
  TapeStep step;
  step.p = DecisionProbs(tape, vars, x, state.h);
  std::copy(noise.begin(), noise.end(), step.noise.begin());
  Var r = GumbelSoftmax(tape, step.p, noise, tau);
  step.r = r;

  LstmOutput read = LstmStep(tape, vars.big, x, state.h, state.c);
  TapeState skim = SkimCandidate(tape, vars, x, state);
  Var r_read = tape.Slice(r, 0, 1);
  Var r_skim = tape.Slice(r, 1, 2);
  step.state.h = tape.Add(tape.ScaleBy(read.h, r_read),
                          tape.ScaleBy(skim.h, r_skim));
  step.state.c = tape.Add(tape.ScaleBy(read.c, r_read),
                          tape.ScaleBy(skim.c, r_skim));
  return step;
}

}  // namespace skimrnn
