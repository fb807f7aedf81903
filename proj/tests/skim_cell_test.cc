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

#include <cmath>
#include <numbers>
#include <vector>

#include "gradient_check.h"
#include "gtest/gtest.h"
#include "skimrnn/errors.h"

namespace skimrnn {
namespace {

using testing::NumericGradient;
using testing::RelativeError;

std::vector<double> RandomVector(Rng &rng, size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double &x : v) x = rng.Uniform(-scale, scale);
  return v;
}

SkimState RandomState(Rng &rng, size_t d) {
  return SkimState{Tensor::Vector(RandomVector(rng, d)),
                   Tensor::Vector(RandomVector(rng, d, 2.0))};
}

SkimUnitParams RandomUnit(Rng &rng, size_t d_in, size_t d, size_t ds) {
  SkimUnitParams p = SkimUnitParams::Zeros(d_in, d, ds);
  p.Initialize(rng);
  // Spread the decision logits so both branches matter.
  for (double &v : p.decision_w.data()) v = rng.Uniform(-1, 1);
  p.decision_b[0] = rng.Uniform(-0.5, 0.5);
  return p;
}

std::vector<Tensor *> UnitTensors(SkimUnitParams &p) {
  return {&p.big.w, &p.big.b, &p.small.w, &p.small.b, &p.decision_w,
          &p.decision_b};
}

// ---- lstm_step ----

TEST(LstmTest, ZeroParamsGiveZeroState) {
  LstmParams p = LstmParams::Zeros(3, 2, 2);
  std::vector<double> x = {1, -2, 3}, h(2), c(2), h_out(2, 7), c_out(2, 7);
  LstmWorkspace ws;
  LstmStep(p, x, h, c, h_out, c_out, ws);
  EXPECT_EQ(h_out, (std::vector<double>{0, 0}));
  EXPECT_EQ(c_out, (std::vector<double>{0, 0}));
}

TEST(LstmTest, SaturatedGatesAddCandidate) {
  LstmParams p = LstmParams::Zeros(1, 1, 1);
  for (size_t i = 0; i < 4; ++i) p.b[i] = 40.0;  // i, f, o ~ 1; g = tanh(40)
  std::vector<double> x = {0.0}, h = {0.0}, c = {0.25}, h_out(1), c_out(1);
  LstmWorkspace ws;
  LstmStep(p, x, h, c, h_out, c_out, ws);
  EXPECT_NEAR(c_out[0], 1.25, 1e-12);
  EXPECT_NEAR(h_out[0], std::tanh(1.25), 1e-12);
}

TEST(LstmTest, WrongInputLengthIsDimensionError) {
  LstmParams p = LstmParams::Zeros(3, 2, 2);
  std::vector<double> x = {1, 2}, h(2), c(2), h_out(2), c_out(2);
  LstmWorkspace ws;
  EXPECT_THROW(LstmStep(p, x, h, c, h_out, c_out, ws), DimensionError);
  Tape tape;
  LstmVars vars = Bind(tape, p);
  EXPECT_THROW(LstmStep(tape, vars, tape.Constant(x), tape.Constant(h),
                        tape.Constant(c)),
               DimensionError);
}

TEST(LstmTest, InitializationSetsForgetBias) {
  Rng rng(1);
  LstmParams p = LstmParams::Zeros(4, 3, 3);
  p.Initialize(rng);
  for (size_t i = 0; i < 12; ++i) EXPECT_EQ(p.b[i], (i >= 3 && i < 6) ? 1.0 : 0.0);
  const double s = 1.0 / std::sqrt(7.0);
  for (double v : p.w.data()) EXPECT_LE(std::abs(v), s);
}

TEST(LstmTest, RecordedStepMatchesRawBitwise) {
  Rng rng(9);
  LstmParams p = LstmParams::Zeros(5, 4, 6);
  p.Initialize(rng);
  auto x = RandomVector(rng, 5), h = RandomVector(rng, 6), c = RandomVector(rng, 4);
  std::vector<double> h_out(4), c_out(4);
  LstmWorkspace ws;
  LstmStep(p, x, h, c, h_out, c_out, ws);
  Tape tape;
  LstmOutput out = LstmStep(tape, Bind(tape, p), tape.Constant(x),
                            tape.Constant(h), tape.Constant(c));
  EXPECT_EQ(std::vector<double>(out.h.value().begin(), out.h.value().end()), h_out);
  EXPECT_EQ(std::vector<double>(out.c.value().begin(), out.c.value().end()), c_out);
}

TEST(LstmTest, TwoStepGradientMatchesFiniteDifferences) {
  Rng rng(17);
  LstmParams p = LstmParams::Zeros(3, 4, 4);
  p.Initialize(rng);
  const auto x1 = RandomVector(rng, 3), x2 = RandomVector(rng, 3);
  const auto proj = RandomVector(rng, 4);
  auto build = [&](Tape &tape, LstmVars vars) {
    Var h = tape.Constant(std::vector<double>(4, 0.0));
    Var c = tape.Constant(std::vector<double>(4, 0.0));
    LstmOutput s1 = LstmStep(tape, vars, tape.Constant(x1), h, c);
    LstmOutput s2 = LstmStep(tape, vars, tape.Constant(x2), s1.h, s1.c);
    return tape.Add(tape.Dot(s2.h, tape.Constant(proj)), tape.Sum(s2.c));
  };
  p.w.EnableGrad();
  p.b.EnableGrad();
  p.w.ZeroGrad();
  p.b.ZeroGrad();
  Tape tape;
  tape.Backward(build(tape, Bind(tape, p)));
  auto eval = [&] {
    Tape t;
    return build(t, LstmVars{&p, t.Constant(p.w), t.Constant(p.b)}).scalar();
  };
  EXPECT_LE(RelativeError(p.w.grad(), NumericGradient(eval, p.w)), 1e-5);
  EXPECT_LE(RelativeError(p.b.grad(), NumericGradient(eval, p.b)), 1e-5);
}

// ---- decision_probs ----

TEST(DecisionProbsTest, Examples) {
  SkimUnitParams p = SkimUnitParams::Zeros(3, 4, 2);
  std::vector<double> x = {1, 2, 3}, h = {1, 1, 1, 1};
  auto probs = DecisionProbs(p, x, h);
  EXPECT_EQ(probs[0], 0.5);
  EXPECT_EQ(probs[1], 0.5);

  p.decision_b[0] = std::log(3.0);
  probs = DecisionProbs(p, x, h);
  EXPECT_NEAR(probs[0], 0.75, 1e-15);
  EXPECT_NEAR(probs[1], 0.25, 1e-15);

  p.decision_b[0] = 20.0;
  p.decision_b[1] = -20.0;
  EXPECT_GE(DecisionProbs(p, x, h)[0], 1.0 - 1e-12);

  std::vector<double> short_h = {1, 1};
  EXPECT_THROW(DecisionProbs(p, x, short_h), DimensionError);
}

// ---- hard step ----

TEST(SkimStepHardTest, SkipLeavesStateBitwiseUnchanged) {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const size_t d = 1 + rng.Index(8);
    SkimUnitParams p = RandomUnit(rng, 3, d, 0);
    SkimState s = RandomState(rng, d);
    auto x = RandomVector(rng, 3);
    StepOutcome out = SkimStepHard(p, x, s, ForcedPolicy{Decision::kSkim});
    EXPECT_EQ(out.state, s);
    EXPECT_EQ(*out.decision, Decision::kSkim);
  }
}

TEST(SkimStepHardTest, SkimReplacesOnlyLeadingSlice) {
  Rng rng(4);
  SkimUnitParams p = RandomUnit(rng, 3, 4, 2);
  SkimState s{Tensor::Vector({1, 2, 3, 4}), Tensor::Vector({5, 6, 7, 8})};
  auto x = RandomVector(rng, 3);
  StepOutcome out = SkimStepHard(p, x, s, ForcedPolicy{Decision::kSkim});

  std::vector<double> c_small = {5, 6}, h_small(2), c_new(2);
  LstmWorkspace ws;
  LstmStep(p.small, x, s.h.data(), c_small, h_small, c_new, ws);
  EXPECT_EQ(out.state.h.values(),
            (std::vector<double>{h_small[0], h_small[1], 3, 4}));
  EXPECT_EQ(out.state.c.values(),
            (std::vector<double>{c_new[0], c_new[1], 7, 8}));
}

TEST(SkimStepHardTest, ReadEqualsPlainBigCellBitwise) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    SkimUnitParams p = RandomUnit(rng, 4, 6, 2);
    SkimState s = RandomState(rng, 6);
    auto x = RandomVector(rng, 4);
    StepOutcome out = SkimStepHard(p, x, s, ForcedPolicy{Decision::kRead});
    std::vector<double> h(6), c(6);
    LstmWorkspace ws;
    LstmStep(p.big, x, s.h.data(), s.c.data(), h, c, ws);
    EXPECT_EQ(out.state.h.values(), h);
    EXPECT_EQ(out.state.c.values(), c);
  }
}

TEST(SkimStepHardTest, SkimCarriesTrailingComponents) {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t d = 2 + rng.Index(7);
    const size_t ds = rng.Index(d);
    SkimUnitParams p = RandomUnit(rng, 3, d, ds);
    SkimState s = RandomState(rng, d);
    StepOutcome out =
        SkimStepHard(p, RandomVector(rng, 3), s, ForcedPolicy{Decision::kSkim});
    for (size_t i = ds; i < d; ++i) {
      EXPECT_EQ(out.state.h[i], s.h[i]);
      EXPECT_EQ(out.state.c[i], s.c[i]);
    }
  }
}

TEST(SkimStepHardTest, ThresholdPolicy) {
  Rng rng(7);
  SkimUnitParams p = RandomUnit(rng, 3, 4, 1);
  for (int trial = 0; trial < 200; ++trial) {
    p.decision_b[1] = rng.Uniform(-30, 30);
    SkimState s = RandomState(rng, 4);
    StepOutcome out =
        SkimStepHard(p, RandomVector(rng, 3), s, ThresholdPolicy{0.0});
    EXPECT_EQ(*out.decision, Decision::kRead);
  }
  SkimState s = SkimState::Zeros(4);
  EXPECT_THROW(SkimStepHard(p, RandomVector(rng, 3), s, ThresholdPolicy{1.5}),
               ContractError);
  EXPECT_THROW(SkimStepHard(p, RandomVector(rng, 3), s, ThresholdPolicy{-0.1}),
               ContractError);
}

TEST(SkimStepHardTest, ArgmaxAgreesWithHalfThreshold) {
  Rng rng(8);
  for (int trial = 0; trial < 10000; ++trial) {
    const double a = rng.Uniform();
    std::array<double, 2> p = {a, 1.0 - a};
    EXPECT_EQ(Decide(ArgmaxPolicy{}, p), Decide(ThresholdPolicy{0.5}, p));
  }
  std::array<double, 2> tie = {0.5, 0.5};
  EXPECT_EQ(Decide(ArgmaxPolicy{}, tie), Decision::kRead);
}

TEST(SkimStepHardTest, SamplePolicyFrequencyMatchesProbability) {
  Rng rng(10);
  std::array<double, 2> p = {0.3, 0.7};
  int reads = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) reads += Decide(SamplePolicy{&rng}, p) == Decision::kRead;
  // 5 standard errors.
  EXPECT_NEAR(reads / static_cast<double>(n), 0.3, 5 * std::sqrt(0.21 / n));
}

// ---- Gumbel ----

TEST(GumbelTest, ClosedFormValues) {
  EXPECT_NEAR(GumbelFromUniform(0.5), -std::log(std::log(2.0)), 1e-15);
  EXPECT_NEAR(GumbelFromUniform(0.5), 0.36651, 1e-5);
  EXPECT_NEAR(GumbelFromUniform(std::exp(-1.0)), 0.0, 1e-15);
  EXPECT_TRUE(std::isfinite(GumbelFromUniform(0.0)));
  EXPECT_TRUE(std::isfinite(GumbelFromUniform(1.0)));
}

TEST(GumbelTest, MeanIsEulerMascheroni) {
  Rng rng(12);
  double sum = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) sum += SampleGumbel(rng);
  EXPECT_NEAR(sum / n, std::numbers::egamma, 0.01);
}

TEST(GumbelSoftmaxTest, Examples) {
  std::array<double, 2> uniform = {0.5, 0.5}, zero = {0.0, 0.0};
  for (double tau : {0.1, 1.0, 7.0}) {
    auto r = GumbelSoftmax(uniform, zero, tau);
    EXPECT_EQ(r[0], 0.5);
    EXPECT_EQ(r[1], 0.5);
  }
  std::array<double, 2> g = {1.0, 0.0};
  auto r = GumbelSoftmax(uniform, g, 1.0);
  const double e = std::numbers::e;
  EXPECT_NEAR(r[0], e / (e + 1), 1e-15);
  EXPECT_NEAR(r[1], 1 / (e + 1), 1e-15);

  std::array<double, 2> p = {0.6, 0.4};
  r = GumbelSoftmax(p, zero, 0.01);
  EXPECT_GE(std::max(r[0], r[1]), 0.999);

  EXPECT_THROW(GumbelSoftmax(p, zero, 0.0), ContractError);
  EXPECT_THROW(GumbelSoftmax(p, zero, -1.0), ContractError);
}

TEST(GumbelSoftmaxTest, SaturatedProbabilityIsClamped) {
  std::array<double, 2> p = {1.0, 0.0}, g = {0.0, 0.0};
  auto r = GumbelSoftmax(p, g, 1.0);
  EXPECT_TRUE(std::isfinite(r[0]) && std::isfinite(r[1]));
  EXPECT_GT(r[1], 0.0);
}

// The relaxed weight of the winning branch is sigmoid(|delta| / tau) where
// delta = log p1 - log p2 + g1 - g2.
TEST(GumbelSoftmaxTest, WinningWeightIsLogisticOfMargin) {
  Rng rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    const double a = rng.Uniform(0.01, 0.99);
    std::array<double, 2> p = {a, 1 - a};
    std::array<double, 2> g = {SampleGumbel(rng), SampleGumbel(rng)};
    const double tau = rng.Uniform(0.01, 2.0);
    const double delta = std::log(p[0]) - std::log(p[1]) + g[0] - g[1];
    auto r = GumbelSoftmax(p, g, tau);
    EXPECT_NEAR(std::max(r[0], r[1]), 1.0 / (1.0 + std::exp(-std::abs(delta) / tau)),
                1e-12);
    if (std::abs(delta) / tau >= std::log(99.0)) {
      EXPECT_GE(std::max(r[0], r[1]), 0.99 - 1e-15);
    }
  }
}

// ---- relaxed step ----

TEST(SkimStepRelaxedTest, OneHotWeightsReduceToHardRead) {
  Rng rng(14);
  SkimUnitParams p = RandomUnit(rng, 3, 5, 2);
  SkimState s = RandomState(rng, 5);
  auto x = RandomVector(rng, 3);
  std::array<double, 2> noise = {40.0, 0.0};
  StepOutcome relaxed = SkimStepRelaxed(p, x, s, 1.0, noise);
  ASSERT_TRUE(relaxed.r.has_value());
  EXPECT_LT((*relaxed.r)[1], 1e-15);
  StepOutcome hard = SkimStepHard(p, x, s, ForcedPolicy{Decision::kRead});
  for (size_t i = 0; i < 5; ++i) {
    EXPECT_NEAR(relaxed.state.h[i], hard.state.h[i], 1e-12);
    EXPECT_NEAR(relaxed.state.c[i], hard.state.c[i], 1e-12);
  }
}

TEST(SkimStepRelaxedTest, StateIsConvexBlendOfCandidates) {
  Rng rng(15);
  SkimUnitParams p = RandomUnit(rng, 3, 5, 2);
  p.decision_w.Fill(0.0);
  p.decision_b.Fill(0.0);
  SkimState s = RandomState(rng, 5);
  auto x = RandomVector(rng, 3);
  std::array<double, 2> noise = {0.0, 0.0};
  StepOutcome relaxed = SkimStepRelaxed(p, x, s, 0.7, noise);
  EXPECT_EQ((*relaxed.r)[0], 0.5);
  StepOutcome read = SkimStepHard(p, x, s, ForcedPolicy{Decision::kRead});
  StepOutcome skim = SkimStepHard(p, x, s, ForcedPolicy{Decision::kSkim});
  for (size_t i = 0; i < 5; ++i) {
    EXPECT_NEAR(relaxed.state.h[i], 0.5 * (read.state.h[i] + skim.state.h[i]), 1e-15);
    EXPECT_NEAR(relaxed.state.c[i], 0.5 * (read.state.c[i] + skim.state.c[i]), 1e-15);
  }
  double rsum = (*relaxed.r)[0] + (*relaxed.r)[1];
  EXPECT_NEAR(rsum, 1.0, 1e-15);
}

TEST(SkimStepRelaxedTest, RejectsNonPositiveTemperature) {
  Rng rng(16);
  SkimUnitParams p = RandomUnit(rng, 3, 4, 1);
  SkimState s = SkimState::Zeros(4);
  EXPECT_THROW(SkimStepRelaxed(p, RandomVector(rng, 3), s, 0.0, rng),
               ContractError);
}

TEST(SkimStepRelaxedTest, LowTemperatureApproachesHardStep) {
  Rng rng(18);
  int checked = 0;
  while (checked < 300) {
    SkimUnitParams p = RandomUnit(rng, 3, 6, 2);
    SkimState s = RandomState(rng, 6);
    auto x = RandomVector(rng, 3);
    std::array<double, 2> g = {SampleGumbel(rng), SampleGumbel(rng)};
    auto probs = DecisionProbs(p, x, s.h.data());
    const double delta = std::log(probs[0]) - std::log(probs[1]) + g[0] - g[1];
    // Non-tied: the winning branch must dominate by exp(-|delta| / tau)
    // below 1e-6 at tau = 1e-3.
    if (std::abs(delta) < 0.02) continue;
    ++checked;
    StepOutcome relaxed = SkimStepRelaxed(p, x, s, 1e-3, g);
    const Decision winner = delta > 0 ? Decision::kRead : Decision::kSkim;
    StepOutcome hard = SkimStepHard(p, x, s, ForcedPolicy{winner});
    for (size_t i = 0; i < 6; ++i) {
      EXPECT_LE(std::abs(relaxed.state.h[i] - hard.state.h[i]), 1e-6);
      EXPECT_LE(std::abs(relaxed.state.c[i] - hard.state.c[i]), 1e-6);
    }
  }
}

// Loss = w . h_T + sum(c_T) over an unrolled relaxed sequence.
Var RelaxedSequenceLoss(Tape &tape, const SkimUnitVars &vars,
                        const std::vector<std::vector<double>> &xs,
                        const std::vector<std::array<double, 2>> &noise,
                        const std::vector<double> &proj, double tau) {
  const size_t d = vars.params->d;
  TapeState s{tape.Constant(std::vector<double>(d, 0.1)),
              tape.Constant(std::vector<double>(d, -0.2))};
  for (size_t t = 0; t < xs.size(); ++t) {
    s = SkimStepRelaxed(tape, vars, tape.Constant(xs[t]), s, tau, noise[t]).state;
  }
  return tape.Add(tape.Dot(s.h, tape.Constant(proj)), tape.Sum(s.c));
}

TEST(SkimStepRelaxedTest, GradientsMatchFiniteDifferences) {
  Rng rng(19);
  for (int trial = 0; trial < 6; ++trial) {
    const size_t d = 2 + rng.Index(7);        // d <= 8
    const size_t ds = rng.Index(std::min<size_t>(d, 4));  // d' <= 3
    const size_t steps = 1 + rng.Index(5);    // T <= 5
    const size_t d_in = 1 + rng.Index(4);
    SkimUnitParams p = RandomUnit(rng, d_in, d, ds);
    std::vector<std::vector<double>> xs;
    std::vector<std::array<double, 2>> noise;
    for (size_t t = 0; t < steps; ++t) {
      xs.push_back(RandomVector(rng, d_in));
      noise.push_back({SampleGumbel(rng), SampleGumbel(rng)});
    }
    const auto proj = RandomVector(rng, d);
    const double tau = rng.Uniform(0.5, 1.0);

    for (Tensor *t : UnitTensors(p)) {
      t->EnableGrad();
      t->ZeroGrad();
    }
    Tape tape;
    tape.Backward(RelaxedSequenceLoss(tape, Bind(tape, p), xs, noise, proj, tau));
    auto eval = [&] {
      Tape t;
      return RelaxedSequenceLoss(t, BindConst(t, p), xs, noise, proj, tau)
          .scalar();
    };
    double decision_norm = 0.0;
    for (double g : p.decision_w.grad()) decision_norm += g * g;
    EXPECT_GT(decision_norm, 0.0);
    const char *names[] = {"big.w", "big.b", "small.w", "small.b",
                           "decision.w", "decision.b"};
    int k = 0;
    for (Tensor *t : UnitTensors(p)) {
      std::vector<double> analytic(t->grad().begin(), t->grad().end());
      EXPECT_LE(RelativeError(analytic, NumericGradient(eval, *t)), 1e-4)
          << names[k] << " d=" << d << " ds=" << ds << " T=" << steps;
      ++k;
    }
  }
}

// ---- temperature ----

TEST(TemperatureTest, Schedule) {
  TemperatureSchedule s;
  EXPECT_EQ(s.At(0), 1.0);
  EXPECT_NEAR(s.At(6931), 0.5, 1e-4);
  EXPECT_GE(s.At(6931), 0.5);
  EXPECT_EQ(s.At(1000000), 0.5);
  double prev = s.At(0);
  for (int64_t n = 1; n < 20000; n += 37) {
    EXPECT_LE(s.At(n), prev);
    EXPECT_GE(s.At(n), 0.5);
    prev = s.At(n);
  }
}

}  // namespace
}  // namespace skimrnn
