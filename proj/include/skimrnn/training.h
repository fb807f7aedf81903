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

#ifndef SKIMRNN_TRAINING_H_
#define SKIMRNN_TRAINING_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "skimrnn/data.h"
#include "skimrnn/models.h"
#include "skimrnn/objective.h"
#include "skimrnn/skim_cell.h"
#include "skimrnn/tape.h"

namespace skimrnn {

struct TrainConfig {
  double lr = 1e-3;
  double gamma = 0.0;
  int64_t batch_size = 32;
  // Global steps of forced reading before relaxed training starts.
  int64_t pretrain_steps = 0;
  // Global steps without validation improvement before stopping.
  int64_t patience = 3000;
  int64_t max_steps = 1000;
  int64_t eval_interval = 100;
  uint64_t seed = 0;
  TemperatureSchedule schedule;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Global gradient norm cap; 0 disables clipping.
  double clip_norm = 5.0;

  // Throws ConfigError naming the first invalid field.
  void Validate() const;
};

// Adam with bias correction over a fixed parameter list. Reads each
// tensor's grad() and updates its values in place.
class Adam {
 public:
  Adam(std::vector<NamedTensor> params, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);

  // One update. `step` is the global step reported on errors. Throws
  // TrainingError if any gradient is not finite; parameters are untouched
  // in that case.
  void Step(int64_t step);

  int64_t updates() const { return t_; }
  const std::vector<std::vector<double>> &first_moments() const { return m_; }
  const std::vector<std::vector<double>> &second_moments() const { return v_; }

 private:
  std::vector<NamedTensor> params_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

void ZeroGrads(std::span<const NamedTensor> params);

// Scales all gradients so their joint L2 norm is at most max_norm. Returns
// the norm before scaling.
double ClipGradNorm(std::span<const NamedTensor> params, double max_norm);

struct EvalResult {
  // Accuracy for classification, exact match for span QA.
  double metric = 0.0;
  std::optional<double> f1;
  double skim_rate = 0.0;
  double flop_r = 1.0;
  // One entry per recurrent unit.
  std::vector<double> unit_skim_rates;
};

// What Train() needs from a model and its data.
class TrainingTask {
 public:
  virtual ~TrainingTask() = default;
  virtual std::vector<NamedTensor> Parameters() = 0;
  // Every tensor that a snapshot must restore.
  virtual std::vector<NamedTensor> Tensors() = 0;
  virtual size_t num_train() const = 0;
  virtual Var TrainLoss(Tape &tape, size_t index, const TrainContext &ctx,
                        LossParts *parts) = 0;
  virtual EvalResult Evaluate(const DecisionPolicy &policy) = 0;
};

struct HistoryRow {
  int64_t step = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
  double skim_rate = 0.0;
  double tau = 1.0;
  double flop_r = 1.0;
};

struct TrainResult {
  std::vector<HistoryRow> history;
  int64_t steps = 0;
  // "early_stop" or "max_steps".
  std::string halt_reason;
  int64_t best_step = -1;
  EvalResult best;
};

// Mini-batch training. Steps with n < pretrain_steps force every unit to
// read and drop the skim loss; later steps use relaxed decisions at
// tau = schedule.At(n) and the full loss. Validation runs every
// eval_interval steps and after the last step, with forced reading while
// pretraining and argmax decisions afterwards. Best tracking restarts when
// pretraining ends and early stopping only applies after it. The latest
// snapshot with the best metric is restored on return. Deterministic for a
// given seed.
TrainResult Train(TrainingTask &task, const TrainConfig &cfg);

void WriteHistoryCsv(std::ostream &out, const std::vector<HistoryRow> &rows);

// Classification over encoded examples.
class ClassifierTask : public TrainingTask {
 public:
  ClassifierTask(ClassifierModel &model, std::vector<LabeledExample> train,
                 std::vector<LabeledExample> val);

  std::vector<NamedTensor> Parameters() override { return model_.Parameters(); }
  std::vector<NamedTensor> Tensors() override { return model_.Tensors(); }
  size_t num_train() const override { return train_.size(); }
  Var TrainLoss(Tape &tape, size_t index, const TrainContext &ctx,
                LossParts *parts) override;
  EvalResult Evaluate(const DecisionPolicy &policy) override;

 private:
  ClassifierModel &model_;
  std::vector<LabeledExample> train_;
  std::vector<LabeledExample> val_;
};

// With skip_on_skim, Flop-R charges skim steps for the decision only.
EvalResult EvaluateClassifier(const ClassifierModel &model,
                              std::span<const LabeledExample> examples,
                              const InferenceOptions &opts);

// Span QA over encoded examples.
class QaTask : public TrainingTask {
 public:
  QaTask(QaAttentionModel &model, std::vector<SpanExample> train,
         std::vector<SpanExample> val);

  std::vector<NamedTensor> Parameters() override { return model_.Parameters(); }
  std::vector<NamedTensor> Tensors() override { return model_.Tensors(); }
  size_t num_train() const override { return train_.size(); }
  Var TrainLoss(Tape &tape, size_t index, const TrainContext &ctx,
                LossParts *parts) override;
  EvalResult Evaluate(const DecisionPolicy &policy) override;

 private:
  QaAttentionModel &model_;
  std::vector<SpanExample> train_;
  std::vector<SpanExample> val_;
};

EvalResult EvaluateQa(const QaAttentionModel &model,
                      std::span<const SpanExample> examples,
                      const InferenceOptions &opts);

}  // namespace skimrnn

#endif  // SKIMRNN_TRAINING_H_
