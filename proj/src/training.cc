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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <utility>

#include "skimrnn/errors.h"
#include "skimrnn/flops.h"

namespace skimrnn {

namespace {

void RequirePositive(const char *field, double v) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(field, "must be > 0, got " + std::to_string(v));
  }
}

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::Validate() const {
  RequirePositive("lr", lr);
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw ConfigError("gamma", "must be >= 0, got " + std::to_string(gamma));
  }
  if (batch_size <= 0) throw ConfigError("batch_size", "must be > 0");
  if (pretrain_steps < 0) throw ConfigError("pretrain_steps", "must be >= 0");
  if (patience <= 0) throw ConfigError("patience", "must be > 0");
  if (max_steps <= 0) throw ConfigError("max_steps", "must be > 0");
  if (eval_interval <= 0) throw ConfigError("eval_interval", "must be > 0");
  if (!(schedule.rate >= 0.0)) {
    throw ConfigError("anneal_rate", "must be >= 0");
  }
  RequirePositive("tau_floor", schedule.floor);
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2", "must lie in [0, 1)");
  RequirePositive("eps", eps);
  if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm", "must be >= 0");
}

Adam::Adam(std::vector<NamedTensor> params, double lr, double beta1,
           double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2),
      eps_(eps) {
  for (NamedTensor &p : params_) {
    p.second->EnableGrad();
    m_.emplace_back(p.second->size(), 0.0);
    v_.emplace_back(p.second->size(), 0.0);
  }
}

void Adam::Step(int64_t step) {
  for (const NamedTensor &p : params_) {
    for (double g : p.second->grad()) {
      if (!std::isfinite(g)) {
        throw TrainingError("non-finite gradient in " + p.first, step);
      }
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t k = 0; k < params_.size(); ++k) {
    Tensor &w = *params_[k].second;
    auto g = w.grad();
    auto &m = m_[k];
    auto &v = v_[k];
    for (size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

void ZeroGrads(std::span<const NamedTensor> params) {
  for (const NamedTensor &p : params) {
    p.second->EnableGrad();
    p.second->ZeroGrad();
  }
}

double ClipGradNorm(std::span<const NamedTensor> params, double max_norm) {
  double sq = 0.0;
  for (const NamedTensor &p : params) {
    for (double g : p.second->grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (const NamedTensor &p : params) {
      for (double &g : p.second->grad()) g *= scale;
    }
  }
  return norm;
}

TrainResult Train(TrainingTask &task, const TrainConfig &cfg) {
  cfg.Validate();
  const size_t n_train = task.num_train();
  if (n_train == 0) throw ContractError("train: empty training set");

  Rng root(cfg.seed);
  Rng shuffle_rng = root.Fork();
  Rng noise_rng = root.Fork();

  std::vector<NamedTensor> params = task.Parameters();
  std::vector<NamedTensor> tensors = task.Tensors();
  Adam adam(params, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);

  std::vector<size_t> order(n_train);
  std::iota(order.begin(), order.end(), size_t{0});
  std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
  size_t cursor = 0;

  TrainResult result;
  std::vector<std::vector<double>> snapshot;
  double best_metric = -std::numeric_limits<double>::infinity();
  int64_t last_improvement = 0;
  bool best_in_pretrain = true;
  double loss_sum = 0.0;
  int64_t loss_count = 0;
  const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);

  for (int64_t n = 0; n < cfg.max_steps; ++n) {
    const bool pretrain = n < cfg.pretrain_steps;
    const double tau = cfg.schedule.At(n);
    TrainContext ctx;
    ctx.mode = pretrain ? TrainMode::kForcedRead : TrainMode::kRelaxed;
    ctx.tau = tau;
    ctx.gamma = pretrain ? 0.0 : cfg.gamma;
    ctx.rng = &noise_rng;

    ZeroGrads(params);
    double batch_loss = 0.0;
    for (int64_t b = 0; b < cfg.batch_size; ++b) {
      if (cursor == n_train) {
        std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
        cursor = 0;
      }
      Tape tape;
      LossParts parts;
      Var loss = task.TrainLoss(tape, order[cursor++], ctx, &parts);
      if (!std::isfinite(parts.total)) {
        throw TrainingError("loss diverged (" + FormatDouble(parts.total) + ")",
                            n);
      }
      tape.Backward(tape.Scale(loss, inv_batch));
      batch_loss += parts.total;
    }
    ClipGradNorm(params, cfg.clip_norm);
    adam.Step(n);
    loss_sum += batch_loss * inv_batch;
    ++loss_count;
    result.steps = n + 1;

    const int64_t done = n + 1;
    if (done % cfg.eval_interval != 0 && done != cfg.max_steps) continue;

    const bool eval_pretrain = done <= cfg.pretrain_steps;
    if (best_in_pretrain && !eval_pretrain) {
      best_metric = -std::numeric_limits<double>::infinity();
      best_in_pretrain = false;
      last_improvement = cfg.pretrain_steps;
    }
    DecisionPolicy policy = ArgmaxPolicy{};
    if (eval_pretrain) policy = ForcedPolicy{Decision::kRead};
    EvalResult eval = task.Evaluate(policy);

    HistoryRow row;
    row.step = done;
    row.train_loss = loss_sum / static_cast<double>(loss_count);
    row.val_metric = eval.metric;
    row.skim_rate = eval.skim_rate;
    row.tau = tau;
    row.flop_r = eval.flop_r;
    result.history.push_back(row);
    loss_sum = 0.0;
    loss_count = 0;

    if (eval.metric > best_metric) last_improvement = done;
    if (eval.metric >= best_metric) {
      best_metric = eval.metric;
      result.best_step = done;
      result.best = eval;
      snapshot.clear();
      for (const NamedTensor &t : tensors) {
        snapshot.emplace_back(t.second->data().begin(), t.second->data().end());
      }
    }
    if (!eval_pretrain && done - last_improvement >= cfg.patience &&
        done < cfg.max_steps) {
      result.halt_reason = "early_stop";
      break;
    }
  }
  if (result.halt_reason.empty()) result.halt_reason = "max_steps";
  for (size_t i = 0; i < snapshot.size(); ++i) {
    std::copy(snapshot[i].begin(), snapshot[i].end(),
              tensors[i].second->data().begin());
  }
  return result;
}

void WriteHistoryCsv(std::ostream &out, const std::vector<HistoryRow> &rows) {
  out << "step,train_loss,val_metric,skim_rate,tau,flop_r\n";
  for (const HistoryRow &r : rows) {
    out << r.step << ',' << FormatDouble(r.train_loss) << ','
        << FormatDouble(r.val_metric) << ',' << FormatDouble(r.skim_rate)
        << ',' << FormatDouble(r.tau) << ',' << FormatDouble(r.flop_r) << '\n';
  }
}

// ---- Tasks ----

ClassifierTask::ClassifierTask(ClassifierModel &model,
                               std::vector<LabeledExample> train,
                               std::vector<LabeledExample> val)
    : model_(model), train_(std::move(train)), val_(std::move(val)) {
  if (val_.empty()) throw ContractError("classifier task: empty validation set");
}

Var ClassifierTask::TrainLoss(Tape &tape, size_t index, const TrainContext &ctx,
                              LossParts *parts) {
  const LabeledExample &ex = train_.at(index);
  return model_.Loss(tape, ex.ids, ex.label, ctx, parts);
}

EvalResult ClassifierTask::Evaluate(const DecisionPolicy &policy) {
  InferenceOptions opts;
  opts.policy = policy;
  return EvaluateClassifier(model_, val_, opts);
}

EvalResult EvaluateClassifier(const ClassifierModel &model,
                              std::span<const LabeledExample> examples,
                              const InferenceOptions &opts) {
  if (examples.empty()) throw ContractError("evaluate: empty dataset");
  SkimConfig cfg = model.flop_config();
  if (opts.skip_on_skim) cfg.d_small = 0;
  FlopLedger ledger(cfg);
  size_t correct = 0;
  for (const LabeledExample &ex : examples) {
    ClassifyResult r = model.Classify(ex.ids, opts);
    const auto best = std::max_element(r.probs.begin(), r.probs.end());
    if (best - r.probs.begin() == ex.label) ++correct;
    ledger.RecordTrace(r.trace);
  }
  EvalResult eval;
  eval.metric = static_cast<double>(correct) / static_cast<double>(examples.size());
  eval.skim_rate = static_cast<double>(ledger.skim_steps()) /
                   static_cast<double>(ledger.steps());
  eval.flop_r = model.kind == RnnKind::kLstm ? 1.0 : ledger.flop_reduction();
  eval.unit_skim_rates = {eval.skim_rate};
  return eval;
}

QaTask::QaTask(QaAttentionModel &model, std::vector<SpanExample> train,
               std::vector<SpanExample> val)
    : model_(model), train_(std::move(train)), val_(std::move(val)) {
  if (val_.empty()) throw ContractError("qa task: empty validation set");
}

Var QaTask::TrainLoss(Tape &tape, size_t index, const TrainContext &ctx,
                      LossParts *parts) {
  const SpanExample &ex = train_.at(index);
  return model_.Loss(tape, ex.context, ex.question, static_cast<size_t>(ex.start),
                     static_cast<size_t>(ex.end), ctx, parts);
}

EvalResult QaTask::Evaluate(const DecisionPolicy &policy) {
  InferenceOptions opts;
  opts.policy = policy;
  return EvaluateQa(model_, val_, opts);
}

EvalResult EvaluateQa(const QaAttentionModel &model,
                      std::span<const SpanExample> examples,
                      const InferenceOptions &opts) {
  if (examples.empty()) throw ContractError("evaluate: empty dataset");
  std::vector<FlopLedger> ledgers;
  for (size_t i = 0; i < QaAttentionModel::kNumUnits; ++i) {
    SkimConfig cfg = model.flop_config(i);
    if (opts.skip_on_skim) cfg.d_small = 0;
    ledgers.emplace_back(cfg);
  }
  size_t exact = 0;
  double f1 = 0.0;
  for (const SpanExample &ex : examples) {
    QaResult r = model.Attend(ex.context, ex.question, opts);
    const auto span = AnswerSpan(r.start_probs, r.end_probs);
    const std::pair<size_t, size_t> gold{static_cast<size_t>(ex.start),
                                         static_cast<size_t>(ex.end)};
    if (span == gold) ++exact;
    f1 += SpanF1(span, gold);
    for (size_t i = 0; i < QaAttentionModel::kNumUnits; ++i) {
      ledgers[i].RecordTrace(r.traces[i]);
    }
  }
  EvalResult eval;
  const double count = static_cast<double>(examples.size());
  eval.metric = static_cast<double>(exact) / count;
  eval.f1 = f1 / count;
  int64_t skims = 0, steps = 0, baseline = 0, total = 0;
  for (const FlopLedger &l : ledgers) {
    eval.unit_skim_rates.push_back(static_cast<double>(l.skim_steps()) /
                                   static_cast<double>(l.steps()));
    skims += l.skim_steps();
    steps += l.steps();
    baseline += l.baseline_total();
    total += l.total();
  }
  eval.skim_rate = static_cast<double>(skims) / static_cast<double>(steps);
  eval.flop_r = model.kind == RnnKind::kLstm
                    ? 1.0
                    : static_cast<double>(baseline) / static_cast<double>(total);
  return eval;
}

}  // namespace skimrnn
