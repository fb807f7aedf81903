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

#include "skimrnn/training.h"

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "gradient_check.h"
#include "gtest/gtest.h"
#include "skimrnn/errors.h"
#include "skimrnn/expected_loss.h"

namespace skimrnn {
namespace {

using testing::NumericGradient;
using testing::RelativeError;

// ---- skim loss ----

TEST(SkimLossTest, Examples) {
  const std::vector<double> ones = {1.0, 1.0, 1.0};
  EXPECT_EQ(SkimLoss(0.7, ones, 0.5), 0.7);
  const std::vector<double> e = {std::exp(-1.0), std::exp(-1.0)};
  EXPECT_NEAR(SkimLoss(0.0, e, 1.0), 1.0, 1e-15);
  const std::vector<double> p = {0.2, 0.9};
  EXPECT_EQ(SkimLoss(1.234, p, 0.0), 1.234);
  EXPECT_THROW(SkimLoss(1.0, std::vector<double>{}, 0.1), ContractError);
  EXPECT_THROW(SkimLoss(1.0, p, -0.1), ContractError);
}

TEST(SkimLossTest, ClampsAtFloor) {
  const std::vector<double> zero = {0.0};
  EXPECT_NEAR(SkimLoss(0.0, zero, 1.0), -std::log(1e-12), 1e-9);
}

TEST(SkimLossTest, NonIncreasingInEachProbability) {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> p(1 + rng.Index(6));
    for (double &v : p) v = rng.Uniform(1e-6, 1.0);
    const size_t k = rng.Index(p.size());
    const double before = SkimLoss(0.3, p, 0.05);
    p[k] = std::min(1.0, p[k] + rng.Uniform(0.0, 0.2));
    EXPECT_LE(SkimLoss(0.3, p, 0.05), before);
  }
}

TEST(SkimLossTest, RecordedTermMatchesScalarVersion) {
  Tape tape;
  std::vector<Var> probs = {tape.Constant(std::vector<double>{0.3, 0.7}),
                            tape.Constant(std::vector<double>{0.9, 0.1}),
                            tape.Constant(std::vector<double>{0.5, 0.5})};
  const std::vector<double> p_skim = {0.7, 0.1, 0.5};
  EXPECT_NEAR(MeanNegLogSkim(tape, probs).scalar(), SkimLoss(0.0, p_skim, 1.0),
              1e-15);
}

// ---- optimizer ----

TEST(AdamTest, FirstStepOnSquare) {
  Tensor w = Tensor::Vector({1.0});
  Adam adam({{"w", &w}}, 0.1);
  w.grad()[0] = 2.0 * w[0];
  adam.Step(0);
  EXPECT_NEAR(w[0], 0.9, 1e-8);
}

TEST(AdamTest, ZeroGradientLeavesParameters) {
  Tensor w = Tensor::Vector({0.3, -2.0});
  Adam adam({{"w", &w}}, 0.1);
  for (int i = 0; i < 3; ++i) adam.Step(i);
  EXPECT_EQ(w[0], 0.3);
  EXPECT_EQ(w[1], -2.0);
}

TEST(AdamTest, IdenticalGradientsGiveIdenticalUpdates) {
  Tensor a = Tensor::Vector({0.5}), b = Tensor::Vector({0.5});
  Adam adam({{"a", &a}, {"b", &b}}, 0.01);
  for (int i = 0; i < 5; ++i) {
    a.grad()[0] = b.grad()[0] = 0.1 * (i + 1);
    adam.Step(i);
  }
  EXPECT_EQ(a[0], b[0]);
}

TEST(AdamTest, MatchesReferenceRecurrence) {
  Rng rng(2);
  Tensor w = Tensor::Vector({0.1, 0.2, 0.3});
  Adam adam({{"w", &w}}, 0.05, 0.8, 0.99, 1e-6);
  std::vector<double> ref = {0.1, 0.2, 0.3}, m(3, 0.0), v(3, 0.0);
  for (int t = 1; t <= 10; ++t) {
    for (size_t i = 0; i < 3; ++i) w.grad()[i] = rng.Uniform(-1.0, 1.0);
    for (size_t i = 0; i < 3; ++i) {
      const double g = w.grad()[i];
      m[i] = 0.8 * m[i] + 0.2 * g;
      v[i] = 0.99 * v[i] + 0.01 * g * g;
      ref[i] -= 0.05 * (m[i] / (1 - std::pow(0.8, t))) /
                (std::sqrt(v[i] / (1 - std::pow(0.99, t))) + 1e-6);
    }
    adam.Step(t);
  }
  for (size_t i = 0; i < 3; ++i) EXPECT_NEAR(w[i], ref[i], 1e-14);
}

TEST(AdamTest, NonFiniteGradientCarriesStep) {
  Tensor w = Tensor::Vector({1.0});
  Adam adam({{"w", &w}}, 0.1);
  w.grad()[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    adam.Step(17);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError &e) {
    EXPECT_EQ(e.step(), 17);
  }
  EXPECT_EQ(w[0], 1.0);
}

TEST(ClipTest, ScalesToMaxNorm) {
  Tensor a = Tensor::Vector({3.0}), b = Tensor::Vector({4.0});
  a.EnableGrad();
  b.EnableGrad();
  a.grad()[0] = 3.0;
  b.grad()[0] = 4.0;
  std::vector<NamedTensor> params = {{"a", &a}, {"b", &b}};
  EXPECT_DOUBLE_EQ(ClipGradNorm(params, 1.0), 5.0);
  EXPECT_DOUBLE_EQ(a.grad()[0], 0.6);
  EXPECT_DOUBLE_EQ(b.grad()[0], 0.8);
  EXPECT_DOUBLE_EQ(ClipGradNorm(params, 0.0), 1.0);
}

TEST(TrainConfigTest, ValidationNamesField) {
  TrainConfig cfg;
  cfg.Validate();
  cfg.gamma = -0.1;
  try {
    cfg.Validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError &e) {
    EXPECT_EQ(e.field(), "gamma");
  }
  cfg = TrainConfig{};
  cfg.lr = 0.0;
  EXPECT_THROW(cfg.Validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.patience = 0;
  EXPECT_THROW(cfg.Validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.pretrain_steps = -1;
  EXPECT_THROW(cfg.Validate(), ConfigError);
}

// ---- gradient of the full objective ----

TEST(ObjectiveGradientTest, RelaxedSequenceMatchesFiniteDifferences) {
  // T = 4, d = 6, d' = 2.
  Rng init(3);
  ClassifierModel m = ClassifierModel::Create(RnnKind::kSkim, 7, 3, 6, 2, 2, init);
  const std::vector<int32_t> ids = {2, 5, 1, 6};
  auto loss_on = [&](Tape &tape) {
    Rng noise(44);
    TrainContext ctx{TrainMode::kRelaxed, 0.9, 0.25, &noise};
    return m.Loss(tape, ids, 0, ctx);
  };
  for (NamedTensor &t : m.Tensors()) t.second->ZeroGrad();
  {
    Tape tape;
    tape.Backward(loss_on(tape));
  }
  auto loss = [&]() {
    Tape tape;
    return loss_on(tape).scalar();
  };
  for (NamedTensor &t : m.Parameters()) {
    std::vector<double> analytic(t.second->grad().begin(), t.second->grad().end());
    EXPECT_LE(RelativeError(analytic, NumericGradient(loss, *t.second)), 1e-4)
        << t.first;
  }
}

// ---- training loop ----

struct SmallKeywordData {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> val;
  size_t vocab_size = 0;
};

SmallKeywordData MakeKeywordData(uint64_t seed, size_t n_train, size_t n_val,
                                 size_t length) {
  KeywordTaskOptions opt;
  opt.seed = seed;
  opt.num_examples = n_train + n_val;
  opt.length = length;
  opt.vocab_size = 20;
  auto text = GenerateKeywordTask(opt);
  std::vector<TextExample> train(text.begin(), text.begin() + n_train);
  std::vector<TextExample> val(text.begin() + n_train, text.end());
  Vocab vocab = BuildVocab(text);
  LabelSet labels;
  SmallKeywordData data;
  data.train = Encode(train, vocab, labels, true);
  data.val = Encode(val, vocab, labels, true);
  data.vocab_size = vocab.size();
  return data;
}

TrainConfig SmallConfig() {
  TrainConfig cfg;
  cfg.lr = 5e-3;
  cfg.batch_size = 4;
  cfg.max_steps = 30;
  cfg.eval_interval = 10;
  cfg.seed = 9;
  return cfg;
}

TEST(TrainTest, FullPretrainEqualsLstmRun) {
  SmallKeywordData data = MakeKeywordData(1, 40, 20, 8);
  Rng a(5), b(5);
  ClassifierModel skim =
      ClassifierModel::Create(RnnKind::kSkim, data.vocab_size, 4, 6, 2, 2, a);
  ClassifierModel lstm =
      ClassifierModel::Create(RnnKind::kLstm, data.vocab_size, 4, 6, 2, 2, b);
  TrainConfig cfg = SmallConfig();
  cfg.gamma = 0.1;
  cfg.pretrain_steps = cfg.max_steps;
  ClassifierTask t1(skim, data.train, data.val), t2(lstm, data.train, data.val);
  TrainResult r1 = Train(t1, cfg), r2 = Train(t2, cfg);
  EXPECT_EQ(skim.embedding, lstm.embedding);
  EXPECT_EQ(skim.unit.big.w, lstm.unit.big.w);
  EXPECT_EQ(skim.unit.big.b, lstm.unit.big.b);
  EXPECT_EQ(skim.proj_w, lstm.proj_w);
  ASSERT_EQ(r1.history.size(), r2.history.size());
  for (size_t i = 0; i < r1.history.size(); ++i) {
    EXPECT_EQ(r1.history[i].train_loss, r2.history[i].train_loss);
    EXPECT_EQ(r1.history[i].val_metric, r2.history[i].val_metric);
    EXPECT_EQ(r1.history[i].skim_rate, 0.0);
  }
}

TEST(TrainTest, PretrainPhaseLeavesDecisionNetworkUntouched) {
  SmallKeywordData data = MakeKeywordData(2, 30, 10, 8);
  Rng rng(6);
  ClassifierModel m =
      ClassifierModel::Create(RnnKind::kSkim, data.vocab_size, 4, 6, 2, 2, rng);
  const Tensor decision_w = m.unit.decision_w;
  const Tensor small_w = m.unit.small.w;
  TrainConfig cfg = SmallConfig();
  cfg.gamma = 1.0;
  cfg.pretrain_steps = cfg.max_steps;
  ClassifierTask task(m, data.train, data.val);
  Train(task, cfg);
  EXPECT_EQ(m.unit.decision_w, decision_w);
  EXPECT_EQ(m.unit.small.w, small_w);
}

TEST(TrainTest, DeterministicGivenSeed) {
  SmallKeywordData data = MakeKeywordData(3, 40, 20, 8);
  std::string csv[2];
  std::vector<Tensor> weights[2];
  for (int run = 0; run < 2; ++run) {
    Rng rng(7);
    ClassifierModel m =
        ClassifierModel::Create(RnnKind::kSkim, data.vocab_size, 4, 6, 2, 2, rng);
    TrainConfig cfg = SmallConfig();
    cfg.gamma = 0.05;
    cfg.pretrain_steps = 10;
    ClassifierTask task(m, data.train, data.val);
    TrainResult r = Train(task, cfg);
    std::ostringstream out;
    WriteHistoryCsv(out, r.history);
    csv[run] = out.str();
    for (NamedTensor &t : m.Tensors()) weights[run].push_back(*t.second);
  }
  EXPECT_EQ(csv[0], csv[1]);
  EXPECT_EQ(weights[0], weights[1]);
}

TEST(TrainTest, EarlyStopHaltsBeforeMaxSteps) {
  SmallKeywordData data = MakeKeywordData(4, 20, 10, 8);
  Rng rng(8);
  ClassifierModel m =
      ClassifierModel::Create(RnnKind::kSkim, data.vocab_size, 4, 6, 2, 2, rng);
  TrainConfig cfg = SmallConfig();
  cfg.lr = 1e-12;
  cfg.max_steps = 200;
  cfg.eval_interval = 5;
  cfg.patience = 20;
  ClassifierTask task(m, data.train, data.val);
  TrainResult r = Train(task, cfg);
  EXPECT_EQ(r.halt_reason, "early_stop");
  EXPECT_LT(r.steps, cfg.max_steps);
}

TEST(TrainTest, RunsToMaxStepsWithoutPatienceExhaustion) {
  SmallKeywordData data = MakeKeywordData(5, 20, 10, 8);
  Rng rng(9);
  ClassifierModel m =
      ClassifierModel::Create(RnnKind::kSkim, data.vocab_size, 4, 6, 2, 2, rng);
  TrainConfig cfg = SmallConfig();
  cfg.patience = 1000;
  ClassifierTask task(m, data.train, data.val);
  TrainResult r = Train(task, cfg);
  EXPECT_EQ(r.halt_reason, "max_steps");
  EXPECT_EQ(r.steps, cfg.max_steps);
  EXPECT_EQ(r.history.back().step, cfg.max_steps);
}

class NanTask : public TrainingTask {
 public:
  std::vector<NamedTensor> Parameters() override { return {{"w", &w_}}; }
  std::vector<NamedTensor> Tensors() override { return {{"w", &w_}}; }
  size_t num_train() const override { return 3; }
  Var TrainLoss(Tape &tape, size_t, const TrainContext &,
                LossParts *parts) override {
    Var loss = tape.Sum(tape.Parameter(w_));
    parts->total = steps_++ < 5 ? loss.scalar()
                                : std::numeric_limits<double>::quiet_NaN();
    return loss;
  }
  EvalResult Evaluate(const DecisionPolicy &) override { return {}; }

 private:
  Tensor w_ = Tensor::Vector({1.0});
  int steps_ = 0;
};

TEST(TrainTest, DivergenceRaisesTrainingError) {
  NanTask task;
  TrainConfig cfg = SmallConfig();
  cfg.batch_size = 1;
  try {
    Train(task, cfg);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError &e) {
    EXPECT_EQ(e.step(), 5);
  }
}

TEST(HistoryCsvTest, Header) {
  std::ostringstream out;
  WriteHistoryCsv(out, {HistoryRow{10, 0.5, 0.75, 0.25, 1.0, 2.0}});
  EXPECT_EQ(out.str(),
            "step,train_loss,val_metric,skim_rate,tau,flop_r\n"
            "10,0.5,0.75,0.25,1,2\n");
}

// ---- expected loss oracle ----

TEST(ExpectedLossTest, TwoBranchAverage) {
  auto run = [](std::span<const Decision> q) {
    HardRun r;
    r.loss = q[0] == Decision::kRead ? 2.0 : 4.0;
    r.p = {{0.5, 0.5}};
    return r;
  };
  EXPECT_DOUBLE_EQ(ExpectedLossByEnumeration(1, run), 3.0);
}

TEST(ExpectedLossTest, RefusesLongSequences) {
  Rng rng(10);
  ClassifierModel m = ClassifierModel::Create(RnnKind::kSkim, 5, 2, 4, 2, 2, rng);
  std::vector<int32_t> ids(13, 2);
  EXPECT_THROW(ExpectedLossBruteForce(m, ids, 0), ContractError);
}

TEST(ExpectedLossTest, SaturatedReadEqualsReadPathLoss) {
  Rng rng(11);
  ClassifierModel m = ClassifierModel::Create(RnnKind::kSkim, 6, 3, 4, 2, 2, rng);
  m.unit.decision_w.Fill(0.0);
  m.unit.decision_b[0] = 800.0;
  m.unit.decision_b[1] = -800.0;
  const std::vector<int32_t> ids = {1, 4, 3, 5, 2};
  const std::vector<Decision> reads(ids.size(), Decision::kRead);
  EXPECT_DOUBLE_EQ(ExpectedLossBruteForce(m, ids, 1),
                   ClassifierHardRun(m, ids, 1, reads).loss);
}

TEST(ExpectedLossTest, MonteCarloAgreesWithEnumeration) {
  Rng rng(12);
  ClassifierModel m = ClassifierModel::Create(RnnKind::kSkim, 8, 3, 4, 2, 2, rng);
  for (double &w : m.unit.decision_w.data()) w *= 4.0;
  for (double &w : m.proj_w.data()) w *= 6.0;
  const std::vector<int32_t> ids = {1, 7, 3, 2, 6, 5};
  const double exact = ExpectedLossBruteForce(m, ids, 0);
  Rng sampler(13);
  MonteCarloEstimate mc = ExpectedLossMonteCarlo(m, ids, 0, 200000, sampler);
  EXPECT_GT(mc.std_error, 0.0);
  EXPECT_LE(std::abs(mc.mean - exact), 3.0 * mc.std_error);
}

}  // namespace
}  // namespace skimrnn
