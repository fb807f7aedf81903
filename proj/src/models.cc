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

#include "skimrnn/models.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "skimrnn/data.h"
#include "skimrnn/errors.h"
#include "skimrnn/kernels.h"

namespace skimrnn {

namespace {

void UniformFill(Tensor &t, double scale, Rng &rng) {
  for (double &v : t.data()) v = rng.Uniform(-scale, scale);
}

std::array<double, kNumChoices> Pair(Var p) {
  auto v = p.value();
  return {v[0], v[1]};
}

}  // namespace

const char *RnnKindName(RnnKind kind) {
  return kind == RnnKind::kLstm ? "lstm" : "skim";
}

RnnKind ParseRnnKind(std::string_view name) {
  if (name == "lstm") return RnnKind::kLstm;
  if (name == "skim") return RnnKind::kSkim;
  throw ContractError("unknown rnn kind '" + std::string(name) +
                      "', expected lstm or skim");
}

UnitRunConfig ConfigFor(const TrainContext &ctx) {
  UnitRunConfig config;
  config.mode = ctx.mode == TrainMode::kForcedRead ? StepMode::kForcedRead
                                                   : StepMode::kRelaxed;
  config.tau = ctx.tau;
  config.rng = ctx.rng;
  return config;
}

UnitRun RunUnit(Tape &tape, const SkimUnitVars &vars, RnnKind kind,
                std::span<const Var> inputs, const UnitRunConfig &config,
                bool reverse) {
  if (config.mode == StepMode::kRelaxed && kind == RnnKind::kSkim &&
      config.rng == nullptr) {
    throw ContractError("relaxed run needs an rng");
  }
  const size_t n = inputs.size();
  const size_t d = vars.params->d;
  UnitRun run;
  run.h.resize(n);
  run.trace.steps.resize(n);
  if (kind == RnnKind::kSkim) run.probs.resize(n);

  TapeState state{tape.Constant(Tensor(Shape{d})),
                  tape.Constant(Tensor(Shape{d}))};
  for (size_t k = 0; k < n; ++k) {
    const size_t t = reverse ? n - 1 - k : k;
    Var x = inputs[t];
    if (kind == RnnKind::kLstm) {
      LstmOutput out = LstmStep(tape, vars.big, x, state.h, state.c);
      state = TapeState{out.h, out.c};
      run.trace.steps[t] = TraceStep{Decision::kRead, 1.0, 0.0};
    } else {
      TapeStep step;
      switch (config.mode) {
        case StepMode::kForcedRead:
          step = SkimStepHard(tape, vars, x, state, Decision::kRead);
          break;
        case StepMode::kHard:
          step = SkimStepHard(tape, vars, x, state, config.policy,
                              config.skip_on_skim);
          break;
        case StepMode::kRelaxed: {
          std::array<double, kNumChoices> noise{};
          for (double &g : noise) g = SampleGumbel(*config.rng);
          step = SkimStepRelaxed(tape, vars, x, state, config.tau, noise);
          auto r = step.r->value();
          step.decision = r[0] >= r[1] ? Decision::kRead : Decision::kSkim;
          break;
        }
      }
      const auto p = Pair(step.p);
      state = step.state;
      run.probs[t] = step.p;
      run.trace.steps[t] = TraceStep{*step.decision, p[0], p[1]};
    }
    run.h[t] = state.h;
  }
  run.last = state;
  return run;
}

// ---- Classifier ----

ClassifierModel ClassifierModel::Zeros(RnnKind kind, size_t vocab_size,
                                       size_t d_in, size_t d, size_t d_small,
                                       size_t num_classes) {
  if (vocab_size < 1) throw ContractError("classifier: empty vocabulary");
  if (num_classes < 2) {
    throw ContractError("classifier: need at least 2 classes, got " +
                        std::to_string(num_classes));
  }
  ClassifierModel m;
  m.kind = kind;
  m.vocab_size = vocab_size;
  m.d_in = d_in;
  m.d = d;
  m.d_small = d_small;
  m.num_classes = num_classes;
  m.embedding = Tensor(Shape{vocab_size, d_in});
  m.unit = SkimUnitParams::Zeros(d_in, d, d_small);
  m.proj_w = Tensor(Shape{num_classes, d});
  m.proj_b = Tensor(Shape{num_classes});
  return m;
}

ClassifierModel ClassifierModel::Create(RnnKind kind, size_t vocab_size,
                                        size_t d_in, size_t d, size_t d_small,
                                        size_t num_classes, Rng &rng) {
  ClassifierModel m = Zeros(kind, vocab_size, d_in, d, d_small, num_classes);
  m.embedding = RandomEmbeddings(vocab_size, d_in, rng);
  m.unit.Initialize(rng);
  UniformFill(m.proj_w, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  return m;
}

void ClassifierModel::CheckIds(std::span<const int32_t> ids) const {
  if (ids.empty()) throw ContractError("classify: empty sequence");
  for (int32_t id : ids) {
    if (id < 0 || static_cast<size_t>(id) >= vocab_size) {
      throw IndexError("token id " + std::to_string(id) +
                       " outside vocabulary of size " +
                       std::to_string(vocab_size));
    }
  }
}

ClassifyResult ClassifierModel::Classify(std::span<const int32_t> ids,
                                         const InferenceOptions &opts) const {
  CheckIds(ids);
  ValidatePolicy(opts.policy);
  ClassifyResult result;
  std::vector<double> h(d, 0.0), c(d, 0.0);
  SkimWorkspace ws;
  for (int32_t id : ids) {
    auto x = embedding.data().subspan(static_cast<size_t>(id) * d_in, d_in);
    if (kind == RnnKind::kLstm) {
      LstmStep(unit.big, x, h, c, h, c, ws.lstm, opts.counter);
      result.trace.Add(Decision::kRead, 1.0, 0.0);
    } else {
      std::array<double, kNumChoices> p{};
      const Decision decision =
          SkimStepHardInPlace(unit, x, h, c, opts.policy, ws, opts.counter,
                              &p, opts.skip_on_skim);
      result.trace.Add(decision, p[0], p[1]);
    }
  }
  std::vector<double> logits(num_classes);
  kernels::MatVec(proj_w.data(), num_classes, d, h, logits, nullptr);
  kernels::Add(logits, proj_b.data(), logits, nullptr);
  result.probs.resize(num_classes);
  kernels::Softmax(logits, result.probs, nullptr);
  return result;
}

Var ClassifierModel::Loss(Tape &tape, std::span<const int32_t> ids,
                          int32_t label, const TrainContext &ctx,
                          LossParts *parts) {
  CheckIds(ids);
  if (label < 0 || static_cast<size_t>(label) >= num_classes) {
    throw IndexError("label " + std::to_string(label) + " outside " +
                     std::to_string(num_classes) + " classes");
  }
  Var emb = freeze_embeddings ? tape.View(embedding) : tape.Parameter(embedding);
  SkimUnitVars vars = Bind(tape, unit);
  std::vector<Var> inputs;
  inputs.reserve(ids.size());
  for (int32_t id : ids) inputs.push_back(tape.Row(emb, static_cast<size_t>(id)));

  UnitRun run = RunUnit(tape, vars, kind, inputs, ConfigFor(ctx));
  Var logits = tape.Add(tape.MatVec(tape.Parameter(proj_w), run.last.h),
                        tape.Parameter(proj_b));
  Var nll = tape.Neg(tape.Sum(tape.Slice(tape.LogSoftmax(logits), label,
                                         static_cast<size_t>(label) + 1)));
  Var total = nll;
  double skim = 0.0;
  if (kind == RnnKind::kSkim) {
    Var skim_term = MeanNegLogSkim(tape, run.probs);
    skim = skim_term.scalar();
    if (ctx.mode == TrainMode::kRelaxed && ctx.gamma > 0.0) {
      total = tape.Add(nll, tape.Scale(skim_term, ctx.gamma));
    }
  }
  if (parts != nullptr) {
    parts->task = nll.scalar();
    parts->skim = skim;
    parts->total = total.scalar();
  }
  return total;
}

std::vector<NamedTensor> ClassifierModel::Tensors() {
  return {{"embedding", &embedding},        {"big.W", &unit.big.w},
          {"big.b", &unit.big.b},           {"small.W", &unit.small.w},
          {"small.b", &unit.small.b},       {"decision.W", &unit.decision_w},
          {"decision.b", &unit.decision_b}, {"output.W", &proj_w},
          {"output.b", &proj_b}};
}

std::vector<NamedTensor> ClassifierModel::Parameters() {
  std::vector<NamedTensor> out;
  for (NamedTensor &t : Tensors()) {
    if (t.first == "embedding" && freeze_embeddings) continue;
    if (kind == RnnKind::kLstm &&
        (t.first.starts_with("small.") || t.first.starts_with("decision."))) {
      continue;
    }
    out.push_back(t);
  }
  return out;
}

// ---- QA ----

namespace {

struct QaVars {
  Var embedding;
  Var attention_w;
  std::array<SkimUnitVars, QaAttentionModel::kNumUnits> units;
  Var start_w;
  Var end_w;
};

struct QaForward {
  Var start_logits;
  Var end_logits;
  std::vector<Var> attention;
  std::array<UnitRun, QaAttentionModel::kNumUnits> runs;
};

QaForward RunQa(Tape &tape, const QaVars &vars, RnnKind kind,
                std::span<const int32_t> context,
                std::span<const int32_t> question,
                const UnitRunConfig &config) {
  QaForward fwd;
  std::vector<Var> qs;
  qs.reserve(question.size());
  for (int32_t id : question) {
    qs.push_back(tape.Row(vars.embedding, static_cast<size_t>(id)));
  }

  std::vector<Var> layer0;
  layer0.reserve(context.size());
  for (int32_t id : context) {
    Var x = tape.Row(vars.embedding, static_cast<size_t>(id));
    std::vector<Var> scores;
    scores.reserve(qs.size());
    for (Var q : qs) {
      const Var feats[] = {x, q, tape.Mul(x, q)};
      scores.push_back(tape.Dot(vars.attention_w, tape.Concat(feats)));
    }
    Var a = tape.Softmax(tape.Concat(scores));
    fwd.attention.push_back(a);
    Var u;
    for (size_t i = 0; i < qs.size(); ++i) {
      Var term = tape.ScaleBy(qs[i], tape.Slice(a, i, i + 1));
      u = u.valid() ? tape.Add(u, term) : term;
    }
    const Var feats[] = {x, u, tape.Mul(x, u)};
    layer0.push_back(tape.Concat(feats));
  }

  fwd.runs[0] = RunUnit(tape, vars.units[0], kind, layer0, config, false);
  fwd.runs[1] = RunUnit(tape, vars.units[1], kind, layer0, config, true);
  std::vector<Var> layer1;
  layer1.reserve(context.size());
  for (size_t t = 0; t < context.size(); ++t) {
    layer1.push_back(tape.Concat(fwd.runs[0].h[t], fwd.runs[1].h[t]));
  }
  fwd.runs[2] = RunUnit(tape, vars.units[2], kind, layer1, config, false);
  fwd.runs[3] = RunUnit(tape, vars.units[3], kind, layer1, config, true);

  std::vector<Var> starts, ends;
  for (size_t t = 0; t < context.size(); ++t) {
    Var o = tape.Concat(fwd.runs[2].h[t], fwd.runs[3].h[t]);
    starts.push_back(tape.Dot(vars.start_w, o));
    ends.push_back(tape.Dot(vars.end_w, o));
  }
  fwd.start_logits = tape.Concat(starts);
  fwd.end_logits = tape.Concat(ends);
  return fwd;
}

QaVars BindQa(Tape &tape, const QaAttentionModel &m) {
  QaVars vars;
  vars.embedding = tape.View(m.embedding);
  vars.attention_w = tape.View(m.attention_w);
  for (size_t i = 0; i < QaAttentionModel::kNumUnits; ++i) {
    vars.units[i] = BindConst(tape, m.units[i]);
  }
  vars.start_w = tape.View(m.start_w);
  vars.end_w = tape.View(m.end_w);
  return vars;
}

}  // namespace

QaAttentionModel QaAttentionModel::Zeros(RnnKind kind, size_t vocab_size,
                                         size_t d_in, size_t d,
                                         size_t d_small) {
  if (vocab_size < 1) throw ContractError("qa model: empty vocabulary");
  QaAttentionModel m;
  m.kind = kind;
  m.vocab_size = vocab_size;
  m.d_in = d_in;
  m.d = d;
  m.d_small = d_small;
  m.embedding = Tensor(Shape{vocab_size, d_in});
  m.attention_w = Tensor(Shape{3 * d_in});
  m.units[0] = SkimUnitParams::Zeros(3 * d_in, d, d_small);
  m.units[1] = SkimUnitParams::Zeros(3 * d_in, d, d_small);
  m.units[2] = SkimUnitParams::Zeros(2 * d, d, d_small);
  m.units[3] = SkimUnitParams::Zeros(2 * d, d, d_small);
  m.start_w = Tensor(Shape{2 * d});
  m.end_w = Tensor(Shape{2 * d});
  return m;
}

QaAttentionModel QaAttentionModel::Create(RnnKind kind, size_t vocab_size,
                                          size_t d_in, size_t d,
                                          size_t d_small, Rng &rng) {
  QaAttentionModel m = Zeros(kind, vocab_size, d_in, d, d_small);
  m.embedding = RandomEmbeddings(vocab_size, d_in, rng);
  UniformFill(m.attention_w, 1.0 / std::sqrt(3.0 * d_in), rng);
  for (SkimUnitParams &u : m.units) u.Initialize(rng);
  UniformFill(m.start_w, 1.0 / std::sqrt(2.0 * d), rng);
  UniformFill(m.end_w, 1.0 / std::sqrt(2.0 * d), rng);
  return m;
}

void QaAttentionModel::CheckIds(std::span<const int32_t> ids) const {
  for (int32_t id : ids) {
    if (id < 0 || static_cast<size_t>(id) >= vocab_size) {
      throw IndexError("token id " + std::to_string(id) +
                       " outside vocabulary of size " +
                       std::to_string(vocab_size));
    }
  }
}

SkimConfig QaAttentionModel::flop_config(size_t unit) const {
  return SkimConfig{units.at(unit).d_in, d, d_small, kNumChoices};
}

QaResult QaAttentionModel::Attend(std::span<const int32_t> context,
                                  std::span<const int32_t> question,
                                  const InferenceOptions &opts) const {
  if (context.empty()) throw ContractError("qa: empty context");
  if (question.empty()) throw ContractError("qa: empty question");
  CheckIds(context);
  CheckIds(question);
  ValidatePolicy(opts.policy);
  Tape tape;
  UnitRunConfig config;
  config.mode = StepMode::kHard;
  config.policy = opts.policy;
  config.skip_on_skim = opts.skip_on_skim;
  QaForward fwd = RunQa(tape, BindQa(tape, *this), kind, context, question,
                        config);
  QaResult result;
  auto sp = tape.Softmax(fwd.start_logits).value();
  auto ep = tape.Softmax(fwd.end_logits).value();
  result.start_probs.assign(sp.begin(), sp.end());
  result.end_probs.assign(ep.begin(), ep.end());
  for (size_t i = 0; i < kNumUnits; ++i) {
    result.traces[i] = std::move(fwd.runs[i].trace);
  }
  if (opts.counter != nullptr) {
    for (size_t i = 0; i < kNumUnits; ++i) {
      FlopLedger ledger(flop_config(i));
      ledger.RecordTrace(result.traces[i]);
      opts.counter->Add(kind == RnnKind::kLstm ? ledger.baseline_total()
                                               : ledger.total());
    }
  }
  return result;
}

std::vector<std::vector<double>> QaAttentionModel::AttentionWeights(
    std::span<const int32_t> context, std::span<const int32_t> question) const {
  if (context.empty()) throw ContractError("qa: empty context");
  if (question.empty()) throw ContractError("qa: empty question");
  CheckIds(context);
  CheckIds(question);
  Tape tape;
  QaForward fwd = RunQa(tape, BindQa(tape, *this), kind, context, question,
                        UnitRunConfig{});
  std::vector<std::vector<double>> out;
  for (Var a : fwd.attention) {
    out.emplace_back(a.value().begin(), a.value().end());
  }
  return out;
}

Var QaAttentionModel::Loss(Tape &tape, std::span<const int32_t> context,
                           std::span<const int32_t> question, size_t start,
                           size_t end, const TrainContext &ctx,
                           LossParts *parts) {
  if (context.empty()) throw ContractError("qa: empty context");
  if (question.empty()) throw ContractError("qa: empty question");
  if (start > end || end >= context.size()) {
    throw IndexError("qa: gold span [" + std::to_string(start) + ", " +
                     std::to_string(end) + "] outside context of length " +
                     std::to_string(context.size()));
  }
  CheckIds(context);
  CheckIds(question);
  QaVars vars;
  vars.embedding =
      freeze_embeddings ? tape.View(embedding) : tape.Parameter(embedding);
  vars.attention_w = tape.Parameter(attention_w);
  for (size_t i = 0; i < kNumUnits; ++i) vars.units[i] = Bind(tape, units[i]);
  vars.start_w = tape.Parameter(start_w);
  vars.end_w = tape.Parameter(end_w);

  QaForward fwd = RunQa(tape, vars, kind, context, question, ConfigFor(ctx));
  Var ls = tape.Slice(tape.LogSoftmax(fwd.start_logits), start, start + 1);
  Var le = tape.Slice(tape.LogSoftmax(fwd.end_logits), end, end + 1);
  Var task = tape.Neg(tape.Sum(tape.Add(ls, le)));
  Var total = task;
  double skim = 0.0;
  if (kind == RnnKind::kSkim) {
    Var sum;
    for (const UnitRun &run : fwd.runs) {
      Var term = MeanNegLogSkim(tape, run.probs);
      sum = sum.valid() ? tape.Add(sum, term) : term;
    }
    Var skim_term = tape.Scale(sum, 1.0 / static_cast<double>(kNumUnits));
    skim = skim_term.scalar();
    if (ctx.mode == TrainMode::kRelaxed && ctx.gamma > 0.0) {
      total = tape.Add(task, tape.Scale(skim_term, ctx.gamma));
    }
  }
  if (parts != nullptr) {
    parts->task = task.scalar();
    parts->skim = skim;
    parts->total = total.scalar();
  }
  return total;
}

std::vector<NamedTensor> QaAttentionModel::Tensors() {
  std::vector<NamedTensor> out = {{"embedding", &embedding},
                                  {"attention.w", &attention_w}};
  for (size_t i = 0; i < kNumUnits; ++i) {
    const std::string p = "unit" + std::to_string(i) + ".";
    SkimUnitParams &u = units[i];
    out.push_back({p + "big.W", &u.big.w});
    out.push_back({p + "big.b", &u.big.b});
    out.push_back({p + "small.W", &u.small.w});
    out.push_back({p + "small.b", &u.small.b});
    out.push_back({p + "decision.W", &u.decision_w});
    out.push_back({p + "decision.b", &u.decision_b});
  }
  out.push_back({"start.w", &start_w});
  out.push_back({"end.w", &end_w});
  return out;
}

std::vector<NamedTensor> QaAttentionModel::Parameters() {
  std::vector<NamedTensor> out;
  for (NamedTensor &t : Tensors()) {
    if (t.first == "embedding" && freeze_embeddings) continue;
    if (kind == RnnKind::kLstm &&
        (t.first.find(".small.") != std::string::npos ||
         t.first.find(".decision.") != std::string::npos)) {
      continue;
    }
    out.push_back(t);
  }
  return out;
}

std::pair<size_t, size_t> AnswerSpan(std::span<const double> start,
                                     std::span<const double> end,
                                     size_t max_span) {
  if (start.empty() || start.size() != end.size()) {
    throw DimensionError("answer_span: start and end must be non-empty and "
                         "of equal length");
  }
  std::pair<size_t, size_t> best{0, 0};
  double best_score = -1.0;
  for (size_t s = 0; s < start.size(); ++s) {
    const size_t last = std::min(end.size() - 1, s + max_span);
    for (size_t e = s; e <= last; ++e) {
      const double score = start[s] * end[e];
      if (score > best_score) {
        best_score = score;
        best = {s, e};
      }
    }
  }
  return best;
}

double SpanF1(std::pair<size_t, size_t> predicted,
              std::pair<size_t, size_t> gold) {
  const size_t lo = std::max(predicted.first, gold.first);
  const size_t hi = std::min(predicted.second, gold.second);
  if (lo > hi) return 0.0;
  const double overlap = static_cast<double>(hi - lo + 1);
  const double precision =
      overlap / static_cast<double>(predicted.second - predicted.first + 1);
  const double recall = overlap / static_cast<double>(gold.second - gold.first + 1);
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace skimrnn
