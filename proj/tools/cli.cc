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


#include "skimrnn/cli.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <initializer_list>
#include <set>
#include <stdexcept>
#include <sstream>
#include <utility>

#include "CLI11.hpp"
#include "json.hpp"
#include "skimrnn/bench.h"
#include "skimrnn/data.h"
#include "skimrnn/errors.h"
#include "skimrnn/flops.h"

namespace skimrnn::cli {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

// Anything rejected before work starts.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Runs f, turning every failure except ConfigError into a UsageError.
template <class F>
auto Checked(F &&f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError &) {
    throw;
  } catch (const std::exception &e) {
    throw UsageError(e.what());
  }
}

// Typed reads from a flat JSON object restricted to a fixed key set.
class Fields {
 public:
  Fields(const json &obj, std::initializer_list<std::string_view> keys)
      : obj_(obj), keys_(keys.begin(), keys.end()) {
    if (!obj_.is_object()) throw ConfigError("config", "expected a JSON object");
    keys_.insert("threads");
    keys_.insert("seed");
    for (const auto &item : obj_.items()) {
      if (!keys_.contains(item.key())) throw ConfigError(item.key(), "unknown key");
    }
  }

  const json *Find(const std::string &key) {
    if (!keys_.contains(key)) throw std::logic_error("unlisted key " + key);
    auto it = obj_.find(key);
    return it == obj_.end() || it->is_null() ? nullptr : &*it;
  }

  double Number(const std::string &key, double fallback) {
    const json *v = Find(key);
    if (v == nullptr) return fallback;
    if (!v->is_number()) throw ConfigError(key, "expected a number");
    return v->get<double>();
  }

  int64_t Integer(const std::string &key, int64_t fallback) {
    const json *v = Find(key);
    if (v == nullptr) return fallback;
    if (!v->is_number_integer()) throw ConfigError(key, "expected an integer");
    if (v->is_number_unsigned() &&
        v->get<uint64_t>() > static_cast<uint64_t>(INT64_MAX)) {
      throw ConfigError(key, "out of range");
    }
    return v->get<int64_t>();
  }

  size_t Count(const std::string &key, size_t fallback) {
    const int64_t n = Integer(key, static_cast<int64_t>(fallback));
    if (n < 0) throw ConfigError(key, "must be >= 0, got " + std::to_string(n));
    return static_cast<size_t>(n);
  }

  uint64_t Seed(const std::string &key, uint64_t fallback) {
    const json *v = Find(key);
    if (v == nullptr) return fallback;
    if (!v->is_number_unsigned()) {
      throw ConfigError(key, "expected a non-negative integer");
    }
    return v->get<uint64_t>();
  }

  bool Bool(const std::string &key, bool fallback) {
    const json *v = Find(key);
    if (v == nullptr) return fallback;
    if (!v->is_boolean()) throw ConfigError(key, "expected true or false");
    return v->get<bool>();
  }

  std::string String(const std::string &key, const std::string &fallback) {
    const json *v = Find(key);
    if (v == nullptr) return fallback;
    if (!v->is_string()) throw ConfigError(key, "expected a string");
    return v->get<std::string>();
  }

  std::vector<double> Numbers(const std::string &key,
                              const std::vector<double> &fallback) {
    const json *v = Find(key);
    if (v == nullptr) return fallback;
    if (!v->is_array()) throw ConfigError(key, "expected an array of numbers");
    std::vector<double> out;
    for (const json &x : *v) {
      if (!x.is_number()) throw ConfigError(key, "expected an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  std::vector<std::string> Strings(const std::string &key,
                                   const std::vector<std::string> &fallback) {
    const json *v = Find(key);
    if (v == nullptr) return fallback;
    if (!v->is_array()) throw ConfigError(key, "expected an array of strings");
    std::vector<std::string> out;
    for (const json &x : *v) {
      if (!x.is_string()) throw ConfigError(key, "expected an array of strings");
      out.push_back(x.get<std::string>());
    }
    return out;
  }


 private:
  const json &obj_;
  std::set<std::string, std::less<>> keys_;
};

void CheckThreads(Fields &f) {
  const int64_t threads = f.Integer("threads", 1);
  if (threads != 1) {
    throw ConfigError("threads", "only single-threaded execution is supported, got " +
                                     std::to_string(threads));
  }
}

std::string Required(Fields &f, const std::string &key) {
  std::string v = f.String(key, "");
  if (v.empty()) throw ConfigError(key, "required");
  return v;
}

void CheckPolicyName(const std::string &name) {
  if (name != "argmax" && name != "sample" && name != "threshold") {
    throw ConfigError("policy", "expected argmax, sample or threshold, got \"" +
                                    name + "\"");
  }
}

void CheckTheta(double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw ConfigError("theta", "must lie in [0, 1]");
  }
}

DecisionPolicy MakePolicy(const std::string &name, double theta, Rng *rng) {
  if (name == "sample") return SamplePolicy{rng};
  if (name == "threshold") return ThresholdPolicy{theta};
  return ArgmaxPolicy{};
}

std::string Num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void WriteText(const fs::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  out.close();
  if (!out) throw Error("cannot write " + path.string());
}

void MakeOutDir(const std::string &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ConfigError("out_dir", "cannot create directory " + dir);
  }
}

double Mean(double a, double b) { return 0.5 * (a + b); }

// Metric keys for a summary; QA adds per-layer rates.
void PutEval(ordered_json &j, const EvalResult &e, bool qa) {
  if (qa) {
    j["exact_match"] = e.metric;
    j["f1"] = e.f1.value_or(0.0);
  } else {
    j["accuracy"] = e.metric;
  }
  j["skim_rate"] = e.skim_rate;
  j["flop_r"] = e.flop_r;
  j["unit_skim_rates"] = e.unit_skim_rates;
  if (qa && e.unit_skim_rates.size() == QaAttentionModel::kNumUnits) {
    j["layer_skim_rates"] = {Mean(e.unit_skim_rates[0], e.unit_skim_rates[1]),
                             Mean(e.unit_skim_rates[2], e.unit_skim_rates[3])};
  }
}

// --- config -----------------------------------------------------------

RunConfig ParseRunConfigJson(const json &j) {
  Fields f(j, {"task", "rnn", "d_in", "d", "d_small", "train_path", "val_path",
               "test_path", "embeddings_path", "freeze_embeddings", "split_punct",
               "out_dir", "policy", "theta", "lr", "gamma", "batch_size",
               "pretrain_steps", "patience", "max_steps", "eval_interval", "seed",
               "anneal_rate", "tau_floor", "beta1", "beta2", "eps", "clip_norm"});
  RunConfig c;
  c.task = f.String("task", c.task);
  if (c.task != "classifier" && c.task != "qa") {
    throw ConfigError("task", "expected \"classifier\" or \"qa\", got \"" +
                                  c.task + "\"");
  }
  const std::string rnn = f.String("rnn", RnnKindName(c.rnn));
  if (rnn != "skim" && rnn != "lstm") {
    throw ConfigError("rnn", "expected \"skim\" or \"lstm\", got \"" + rnn + "\"");
  }
  c.rnn = ParseRnnKind(rnn);
  c.d_in = f.Count("d_in", c.d_in);
  c.d = f.Count("d", c.d);
  c.d_small = f.Count("d_small", c.d_small);
  if (c.d_in == 0) throw ConfigError("d_in", "must be positive");
  if (c.d == 0) throw ConfigError("d", "must be positive");
  if (c.d_small >= c.d) throw ConfigError("d_small", "must be less than d");
  c.train_path = Required(f, "train_path");
  c.val_path = Required(f, "val_path");
  c.test_path = f.String("test_path", "");
  c.embeddings_path = f.String("embeddings_path", "");
  c.freeze_embeddings = f.Bool("freeze_embeddings", false);
  if (c.freeze_embeddings && c.embeddings_path.empty()) {
    throw ConfigError("freeze_embeddings", "requires embeddings_path");
  }
  c.split_punct = f.Bool("split_punct", false);
  if (c.split_punct && c.task == "qa") {
    throw ConfigError("split_punct", "only applies to the classifier task");
  }
  c.out_dir = Required(f, "out_dir");
  c.policy = f.String("policy", c.policy);
  CheckPolicyName(c.policy);
  c.theta = f.Number("theta", c.theta);
  CheckTheta(c.theta);
  CheckThreads(f);

  TrainConfig &t = c.train;
  t.lr = f.Number("lr", t.lr);
  t.gamma = f.Number("gamma", t.gamma);
  t.batch_size = f.Integer("batch_size", t.batch_size);
  t.pretrain_steps = f.Integer("pretrain_steps", t.pretrain_steps);
  t.patience = f.Integer("patience", t.patience);
  t.max_steps = f.Integer("max_steps", t.max_steps);
  t.eval_interval = f.Integer("eval_interval", t.eval_interval);
  t.seed = f.Seed("seed", t.seed);
  t.schedule.rate = f.Number("anneal_rate", t.schedule.rate);
  t.schedule.floor = f.Number("tau_floor", t.schedule.floor);
  t.beta1 = f.Number("beta1", t.beta1);
  t.beta2 = f.Number("beta2", t.beta2);
  t.eps = f.Number("eps", t.eps);
  t.clip_norm = f.Number("clip_norm", t.clip_norm);
  t.Validate();
  return c;
}

// --- models and data --------------------------------------------------

struct LoadedModel {
  ModelBundle bundle;
  bool split_punct = false;
  bool qa() const { return bundle.task == "qa"; }
};

LoadedModel LoadModel(const std::string &path) {
  WeightFile file = WeightFile::Load(path);
  LoadedModel m;
  m.bundle = FromWeightFile(file);
  m.split_punct = file.HasList("split_punct") && file.Value("split_punct") == "1";
  return m;
}

struct EvalData {
  std::vector<LabeledExample> labeled;
  std::vector<SpanExample> spans;
};

EvalData LoadEvalData(const LoadedModel &m, const std::string &path) {
  EvalData data;
  if (m.qa()) {
    data.spans = Encode(ParseSpanFile(path), m.bundle.vocab);
    if (data.spans.empty()) throw ConfigError("data", "no examples in " + path);
  } else {
    LabelSet labels = m.bundle.labels;
    data.labeled = Encode(ParseClassificationFile(path, m.split_punct),
                          m.bundle.vocab, labels, false);
    if (data.labeled.empty()) throw ConfigError("data", "no examples in " + path);
  }
  return data;
}

EvalResult Evaluate(const LoadedModel &m, const EvalData &data,
                    const InferenceOptions &opts) {
  return m.qa() ? EvaluateQa(*m.bundle.qa, data.spans, opts)
                : EvaluateClassifier(*m.bundle.classifier, data.labeled, opts);
}

// --- train ------------------------------------------------------------

struct TrainData {
  Vocab vocab;
  LabelSet labels;
  std::vector<LabeledExample> train, val, test;
  std::vector<SpanExample> span_train, span_val, span_test;
  std::optional<Tensor> embeddings;
};

TrainData LoadTrainData(const RunConfig &c, Rng &emb_rng) {
  TrainData d;
  if (c.task == "qa") {
    auto train = ParseSpanFile(c.train_path);
    if (train.empty()) throw ConfigError("train_path", "no examples");
    d.vocab = BuildVocab(train);
    d.span_train = Encode(train, d.vocab);
    d.span_val = Encode(ParseSpanFile(c.val_path), d.vocab);
    if (d.span_val.empty()) throw ConfigError("val_path", "no examples");
    if (!c.test_path.empty()) {
      d.span_test = Encode(ParseSpanFile(c.test_path), d.vocab);
      if (d.span_test.empty()) throw ConfigError("test_path", "no examples");
    }
  } else {
    auto train = ParseClassificationFile(c.train_path, c.split_punct);
    if (train.empty()) throw ConfigError("train_path", "no examples");
    d.vocab = BuildVocab(train);
    d.train = Encode(train, d.vocab, d.labels, true);
    if (d.labels.size() < 2) {
      throw ConfigError("train_path", "needs at least two distinct labels");
    }
    d.val = Encode(ParseClassificationFile(c.val_path, c.split_punct), d.vocab,
                   d.labels, false);
    if (d.val.empty()) throw ConfigError("val_path", "no examples");
    if (!c.test_path.empty()) {
      d.test = Encode(ParseClassificationFile(c.test_path, c.split_punct),
                      d.vocab, d.labels, false);
      if (d.test.empty()) throw ConfigError("test_path", "no examples");
    }
  }
  if (!c.embeddings_path.empty()) {
    d.embeddings = LoadEmbeddings(c.embeddings_path, d.vocab, c.d_in, emb_rng);
  }
  return d;
}

int CmdTrain(const json &j, std::ostream &out) {
  const RunConfig c = ParseRunConfigJson(j);
  Rng root(c.train.seed);
  Rng init_rng = root.Fork();
  Rng emb_rng = root.Fork();
  Rng eval_rng = root.Fork();
  TrainData data = Checked([&] { return LoadTrainData(c, emb_rng); });
  MakeOutDir(c.out_dir);

  InferenceOptions final_opts;
  final_opts.policy = MakePolicy(c.policy, c.theta, &eval_rng);
  const bool qa = c.task == "qa";
  TrainResult result;
  EvalResult final_eval;
  WeightFile weights;
  std::string eval_split = "val";
  if (qa) {
    QaAttentionModel model = QaAttentionModel::Create(
        c.rnn, data.vocab.size(), c.d_in, c.d, c.d_small, init_rng);
    if (data.embeddings) model.embedding = *data.embeddings;
    model.freeze_embeddings = c.freeze_embeddings;
    QaTask task(model, data.span_train, data.span_val);
    result = Train(task, c.train);
    if (!data.span_test.empty()) eval_split = "test";
    final_eval = EvaluateQa(
        model, data.span_test.empty() ? data.span_val : data.span_test, final_opts);
    weights = ToWeightFile(model, data.vocab);
  } else {
    ClassifierModel model =
        ClassifierModel::Create(c.rnn, data.vocab.size(), c.d_in, c.d, c.d_small,
                                data.labels.size(), init_rng);
    if (data.embeddings) model.embedding = *data.embeddings;
    model.freeze_embeddings = c.freeze_embeddings;
    ClassifierTask task(model, data.train, data.val);
    result = Train(task, c.train);
    if (!data.test.empty()) eval_split = "test";
    final_eval = EvaluateClassifier(
        model, data.test.empty() ? data.val : data.test, final_opts);
    weights = ToWeightFile(model, data.vocab, data.labels);
  }
  weights.AddList("split_punct", {c.split_punct ? "1" : "0"});

  ordered_json summary;
  summary["task"] = c.task;
  summary["rnn"] = RnnKindName(c.rnn);
  summary["d_in"] = c.d_in;
  summary["d"] = c.d;
  summary["d_small"] = c.d_small;
  summary["seed"] = c.train.seed;
  summary["steps"] = result.steps;
  summary["halt_reason"] = result.halt_reason;
  summary["best_step"] = result.best_step;
  summary["best_val_metric"] = result.best.metric;
  summary["eval_split"] = eval_split;
  summary["policy"] = c.policy;
  if (c.policy == "threshold") summary["theta"] = c.theta;
  PutEval(summary, final_eval, qa);

  std::ostringstream history;
  WriteHistoryCsv(history, result.history);
  const fs::path dir(c.out_dir);
  weights.Save((dir / "model.bin").string());
  WriteText(dir / "history.csv", history.str());
  WriteText(dir / "summary.json", summary.dump(2) + "\n");
  out << summary.dump(2) << '\n';
  return kExitOk;
}

// --- eval -------------------------------------------------------------

struct InferenceArgs {
  std::string policy = "argmax";
  double theta = 0.5;
  uint64_t seed = 0;
};

InferenceArgs ReadInferenceArgs(Fields &f) {
  InferenceArgs a;
  a.policy = f.String("policy", a.policy);
  CheckPolicyName(a.policy);
  a.theta = f.Number("theta", a.theta);
  CheckTheta(a.theta);
  a.seed = f.Seed("seed", a.seed);
  return a;
}

int CmdEval(const json &j, std::ostream &out) {
  Fields f(j, {"model", "data", "policy", "theta", "seed", "skip", "out_dir"});
  const std::string model_path = Required(f, "model");
  const std::string data_path = Required(f, "data");
  const InferenceArgs args = ReadInferenceArgs(f);
  const bool skip = f.Bool("skip", false);
  const std::string out_dir = f.String("out_dir", "");
  CheckThreads(f);
  LoadedModel m = Checked([&] { return LoadModel(model_path); });
  const EvalData data = Checked([&] { return LoadEvalData(m, data_path); });
  if (!out_dir.empty()) MakeOutDir(out_dir);

  // Both passes replay the same noise so predictions match the summary.
  Rng rng(args.seed);
  InferenceOptions opts;
  opts.policy = MakePolicy(args.policy, args.theta, &rng);
  opts.skip_on_skim = skip;
  const EvalResult e = Evaluate(m, data, opts);

  ordered_json summary;
  summary["task"] = m.bundle.task;
  summary["examples"] = m.qa() ? data.spans.size() : data.labeled.size();
  summary["policy"] = args.policy;
  if (args.policy == "threshold") summary["theta"] = args.theta;
  summary["skip"] = skip;
  PutEval(summary, e, m.qa());

  if (!out_dir.empty()) {
    rng = Rng(args.seed);
    std::ostringstream pred;
    if (m.qa()) {
      pred << "index\tstart\tend\tgold_start\tgold_end\tf1\tskim_rate\n";
      for (size_t i = 0; i < data.spans.size(); ++i) {
        const SpanExample &ex = data.spans[i];
        QaResult r = m.bundle.qa->Attend(ex.context, ex.question, opts);
        const auto span = AnswerSpan(r.start_probs, r.end_probs);
        const std::pair<size_t, size_t> gold{static_cast<size_t>(ex.start),
                                             static_cast<size_t>(ex.end)};
        pred << i << '\t' << span.first << '\t' << span.second << '\t'
             << ex.start << '\t' << ex.end << '\t' << Num(SpanF1(span, gold))
             << '\t' << Num(SkimRate(std::span<const DecisionTrace>(r.traces)))
             << '\n';
      }
    } else {
      pred << "index\tpredicted\tgold\tskim_rate\n";
      for (size_t i = 0; i < data.labeled.size(); ++i) {
        const LabeledExample &ex = data.labeled[i];
        ClassifyResult r = m.bundle.classifier->Classify(ex.ids, opts);
        const auto best = std::max_element(r.probs.begin(), r.probs.end());
        pred << i << '\t'
             << m.bundle.labels.Name(static_cast<int32_t>(best - r.probs.begin()))
             << '\t' << m.bundle.labels.Name(ex.label) << '\t'
             << Num(SkimRate(r.trace)) << '\n';
      }
    }
    WriteText(fs::path(out_dir) / "predictions.tsv", pred.str());
    WriteText(fs::path(out_dir) / "eval.json", summary.dump(2) + "\n");
  }
  out << summary.dump(2) << '\n';
  return kExitOk;
}

// --- sweep-threshold --------------------------------------------------

std::vector<double> DefaultThresholds() {
  std::vector<double> t;
  for (int i = 0; i <= 10; ++i) t.push_back(i / 10.0);
  return t;
}

int CmdSweep(const json &j, std::ostream &out, std::ostream &err) {
  Fields f(j, {"model", "data", "thresholds", "skip", "out_dir"});
  const std::string model_path = Required(f, "model");
  const std::string data_path = Required(f, "data");
  std::vector<double> thresholds = f.Numbers("thresholds", DefaultThresholds());
  const bool skip = f.Bool("skip", false);
  const std::string out_dir = f.String("out_dir", "");
  CheckThreads(f);
  if (thresholds.empty()) throw ConfigError("thresholds", "empty list");
  for (double &t : thresholds) {
    if (!std::isfinite(t)) throw ConfigError("thresholds", "must be finite");
    const double clamped = std::clamp(t, 0.0, 1.0);
    if (clamped != t) {
      err << "note: threshold " << Num(t) << " clamped to " << Num(clamped) << '\n';
    }
    t = clamped;
  }
  LoadedModel m = Checked([&] { return LoadModel(model_path); });
  const EvalData data = Checked([&] { return LoadEvalData(m, data_path); });
  if (!out_dir.empty()) MakeOutDir(out_dir);

  std::ostringstream csv;
  csv << "mode,theta,metric,skim_rate,flop_r\n";
  for (bool skip_mode : {false, true}) {
    if (skip_mode && !skip) break;
    for (double theta : thresholds) {
      InferenceOptions opts;
      opts.policy = ThresholdPolicy{theta};
      opts.skip_on_skim = skip_mode;
      const EvalResult e = Evaluate(m, data, opts);
      csv << (skip_mode ? "skip" : "skim") << ',' << Num(theta) << ','
          << Num(e.metric) << ',' << Num(e.skim_rate) << ',' << Num(e.flop_r)
          << '\n';
    }
  }
  if (!out_dir.empty()) WriteText(fs::path(out_dir) / "sweep.csv", csv.str());
  out << csv.str();
  return kExitOk;
}

// --- trace ------------------------------------------------------------

struct TraceInput {
  std::vector<std::string> context;
  std::vector<std::string> question;
};

std::vector<TraceInput> ReadTraceInputs(const LoadedModel &m,
                                        const std::string &text,
                                        const std::string &question,
                                        const std::string &file) {
  std::vector<TraceInput> inputs;
  if (!text.empty() && !file.empty()) {
    throw ConfigError("input", "give either input or input_file, not both");
  }
  if (m.qa()) {
    if (!file.empty()) {
      if (!question.empty()) {
        throw ConfigError("question", "not used with input_file");
      }
      for (SpanTextExample &ex : ParseSpanFile(file)) {
        inputs.push_back({std::move(ex.context), std::move(ex.question)});
      }
    } else {
      TraceInput in{Tokenize(text), Tokenize(question)};
      if (in.question.empty()) throw ConfigError("question", "required for a qa model");
      inputs.push_back(std::move(in));
    }
  } else {
    if (!question.empty()) {
      throw ConfigError("question", "only applies to a qa model");
    }
    if (!file.empty()) {
      std::ifstream in(file);
      if (!in) throw ConfigError("input_file", "cannot read " + file);
      std::string line;
      while (std::getline(in, line)) {
        // "label<TAB>text" lines trace the text only.
        const size_t tab = line.find('\t');
        if (tab != std::string::npos) line = line.substr(tab + 1);
        auto tokens = Tokenize(line, m.split_punct);
        if (!tokens.empty()) inputs.push_back({std::move(tokens), {}});
      }
    } else {
      auto tokens = Tokenize(text, m.split_punct);
      if (!tokens.empty()) inputs.push_back({std::move(tokens), {}});
    }
  }
  for (const TraceInput &in : inputs) {
    if (in.context.empty()) throw ConfigError("input", "empty input");
  }
  if (inputs.empty()) throw ConfigError("input", "empty input");
  return inputs;
}

int CmdTrace(const json &j, std::ostream &out) {
  Fields f(j, {"model", "input", "input_file", "question", "color", "json",
               "policy", "theta", "seed", "out_dir"});
  const std::string model_path = Required(f, "model");
  const std::string text = f.String("input", "");
  const std::string file = f.String("input_file", "");
  const std::string question = f.String("question", "");
  const bool color = f.Bool("color", false);
  const bool as_json = f.Bool("json", false);
  const InferenceArgs args = ReadInferenceArgs(f);
  const std::string out_dir = f.String("out_dir", "");
  CheckThreads(f);
  LoadedModel m = Checked([&] { return LoadModel(model_path); });
  const std::vector<TraceInput> inputs =
      Checked([&] { return ReadTraceInputs(m, text, question, file); });
  if (!out_dir.empty()) MakeOutDir(out_dir);

  Rng rng(args.seed);
  InferenceOptions opts;
  opts.policy = MakePolicy(args.policy, args.theta, &rng);
  std::ostringstream jsonl, plain, colored;
  for (size_t i = 0; i < inputs.size(); ++i) {
    const AnnotatedTrace trace =
        m.qa() ? TraceQa(m.bundle, inputs[i].context, inputs[i].question, opts)
               : TraceClassifier(m.bundle, inputs[i].context, opts);
    WriteTraceJsonl(jsonl, trace, i);
    RenderTrace(plain, trace, false);
    if (color) RenderTrace(colored, trace, true);
  }
  if (!out_dir.empty()) {
    WriteText(fs::path(out_dir) / "trace.jsonl", jsonl.str());
    WriteText(fs::path(out_dir) / "trace.txt", plain.str());
  }
  const std::string rendering = color ? colored.str() : plain.str();
  out << (as_json ? jsonl.str() : rendering);
  return kExitOk;
}

// --- bench ------------------------------------------------------------

BenchShape ParseShape(const std::string &text) {
  BenchShape s;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%zu/%zu/%zu%c", &s.d_in, &s.d, &s.d_small,
                  &tail) != 3) {
    throw ConfigError("grid", "expected d_in/d/d_small, got \"" + text + "\"");
  }
  return s;
}

int CmdBench(const json &j, std::ostream &out) {
  Fields f(j, {"grid", "skim_rates", "length", "trials", "warmups", "seed",
               "out_dir"});
  BenchOptions o;
  for (const std::string &s : f.Strings("grid", {"100/100/20", "100/400/20"})) {
    o.grid.push_back(ParseShape(s));
  }
  o.skim_rates = f.Numbers("skim_rates", {0.0, 0.5, 0.9});
  o.length = f.Count("length", o.length);
  o.trials = static_cast<int>(std::min<int64_t>(f.Integer("trials", o.trials), INT32_MAX));
  o.warmups = static_cast<int>(std::min<int64_t>(f.Integer("warmups", o.warmups), INT32_MAX));
  o.seed = f.Seed("seed", o.seed);
  const std::string out_dir = Required(f, "out_dir");
  CheckThreads(f);
  Checked([&] { o.Validate(); });
  MakeOutDir(out_dir);

  const BenchReport report = RunBenchmark(o);
  std::ostringstream wide, lng;
  WriteBenchCsv(wide, report);
  WriteBenchLongCsv(lng, report);
  WriteText(fs::path(out_dir) / "bench.csv", wide.str());
  WriteText(fs::path(out_dir) / "bench_long.csv", lng.str());
  out << wide.str();
  return kExitOk;
}

// --- gen-data ---------------------------------------------------------

int CmdGenData(const json &j, std::ostream &out) {
  Fields f(j, {"task", "seed", "train_size", "val_size", "test_size", "length",
               "vocab_size", "num_keywords", "num_classes", "context_length",
               "num_keys", "num_distractors", "out_dir"});
  const std::string task = f.String("task", "keyword");
  if (task != "keyword" && task != "span") {
    throw ConfigError("task", "expected \"keyword\" or \"span\", got \"" + task + "\"");
  }
  const uint64_t seed = f.Seed("seed", 1);
  const size_t sizes[3] = {f.Count("train_size", 2000), f.Count("val_size", 500),
                           f.Count("test_size", 500)};
  const char *names[3] = {"train", "val", "test"};
  for (int i = 0; i < 3; ++i) {
    if (sizes[i] == 0) throw ConfigError(std::string(names[i]) + "_size", "must be positive");
  }
  const size_t total = sizes[0] + sizes[1] + sizes[2];
  KeywordTaskOptions kw;
  SpanTaskOptions sp;
  const char *keyword_only[] = {"length", "num_keywords", "num_classes"};
  const char *span_only[] = {"context_length", "num_keys", "num_distractors"};
  for (const char *key : task == "keyword" ? span_only : keyword_only) {
    if (j.contains(key)) {
      throw ConfigError(key, "does not apply to the " + task + " task");
    }
  }
  if (task == "keyword") {
    kw.seed = seed;
    kw.num_examples = total;
    kw.length = f.Count("length", kw.length);
    kw.vocab_size = f.Count("vocab_size", kw.vocab_size);
    kw.num_keywords = f.Count("num_keywords", kw.num_keywords);
    kw.num_classes = f.Count("num_classes", kw.num_classes);
  } else {
    sp.seed = seed;
    sp.num_examples = total;
    sp.context_length = f.Count("context_length", sp.context_length);
    sp.vocab_size = f.Count("vocab_size", sp.vocab_size);
    sp.num_keys = f.Count("num_keys", sp.num_keys);
    sp.num_distractors = f.Count("num_distractors", sp.num_distractors);
  }
  const std::string out_dir = Required(f, "out_dir");
  CheckThreads(f);

  std::string files[3];
  Checked([&] {
    size_t begin = 0;
    if (task == "keyword") {
      const auto all = GenerateKeywordTask(kw);
      for (int i = 0; i < 3; ++i) {
        std::ostringstream s;
        WriteClassification(s, {all.begin() + begin, all.begin() + begin + sizes[i]});
        files[i] = s.str();
        begin += sizes[i];
      }
    } else {
      const auto all = GenerateSpanTask(sp);
      for (int i = 0; i < 3; ++i) {
        std::ostringstream s;
        WriteSpans(s, {all.begin() + begin, all.begin() + begin + sizes[i]});
        files[i] = s.str();
        begin += sizes[i];
      }
    }
  });
  MakeOutDir(out_dir);
  const std::string ext = task == "keyword" ? ".tsv" : ".jsonl";
  for (int i = 0; i < 3; ++i) {
    const fs::path path = fs::path(out_dir) / (std::string(names[i]) + ext);
    WriteText(path, files[i]);
    out << path.string() << '\n';
  }
  return kExitOk;
}

// --- trace rendering --------------------------------------------------

UnitTrace MakeUnitTrace(int layer, bool backward, const DecisionTrace &trace,
                        const std::vector<std::string> &tokens) {
  UnitTrace u;
  u.layer = layer;
  u.backward = backward;
  for (size_t t = 0; t < trace.size(); ++t) {
    const TraceStep &s = trace.steps[t];
    u.steps.push_back({t, tokens.at(t), s.decision, s.p_read, s.p_skim});
  }
  return u;
}

json ReadJson(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception &e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

RunConfig ParseRunConfig(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception &e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  return ParseRunConfigJson(j);
}

AnnotatedTrace TraceClassifier(const ModelBundle &bundle,
                               const std::vector<std::string> &tokens,
                               const InferenceOptions &opts) {
  if (!bundle.classifier) throw ContractError("trace: not a classifier model");
  const ClassifierModel &model = *bundle.classifier;
  const ClassifyResult r = model.Classify(bundle.vocab.Encode(tokens), opts);
  AnnotatedTrace out;
  out.units.push_back(MakeUnitTrace(0, false, r.trace, tokens));
  out.skim_rate = SkimRate(r.trace);
  out.flop_r = model.kind == RnnKind::kLstm
                   ? 1.0
                   : FlopReduction(r.trace, model.flop_config());
  return out;
}

AnnotatedTrace TraceQa(const ModelBundle &bundle,
                       const std::vector<std::string> &context,
                       const std::vector<std::string> &question,
                       const InferenceOptions &opts) {
  if (!bundle.qa) throw ContractError("trace: not a qa model");
  const QaAttentionModel &model = *bundle.qa;
  const QaResult r = model.Attend(bundle.vocab.Encode(context),
                                  bundle.vocab.Encode(question), opts);
  AnnotatedTrace out;
  int64_t baseline = 0, total = 0;
  for (size_t i = 0; i < QaAttentionModel::kNumUnits; ++i) {
    out.units.push_back(MakeUnitTrace(static_cast<int>(i / 2), i % 2 == 1,
                                      r.traces[i], context));
    FlopLedger ledger(model.flop_config(i));
    ledger.RecordTrace(r.traces[i]);
    baseline += ledger.baseline_total();
    total += ledger.total();
  }
  out.skim_rate = SkimRate(std::span<const DecisionTrace>(r.traces));
  out.flop_r = model.kind == RnnKind::kLstm
                   ? 1.0
                   : static_cast<double>(baseline) / static_cast<double>(total);
  return out;
}

void WriteTraceJsonl(std::ostream &out, const AnnotatedTrace &trace,
                     size_t example) {
  size_t tokens = 0;
  for (const UnitTrace &u : trace.units) {
    for (const TokenDecision &s : u.steps) {
      ordered_json j;
      j["example"] = example;
      j["layer"] = u.layer;
      j["direction"] = u.backward ? "backward" : "forward";
      j["position"] = s.position;
      j["token"] = s.token;
      j["decision"] = DecisionName(s.decision);
      j["p_read"] = s.p_read;
      j["p_skim"] = s.p_skim;
      out << j.dump() << '\n';
    }
    tokens = std::max(tokens, u.steps.size());
  }
  ordered_json agg;
  agg["example"] = example;
  agg["aggregate"] = true;
  agg["tokens"] = tokens;
  agg["skim_rate"] = trace.skim_rate;
  agg["flop_r"] = trace.flop_r;
  out << agg.dump() << '\n';
}

void RenderTrace(std::ostream &out, const AnnotatedTrace &trace, bool color) {
  for (const UnitTrace &u : trace.units) {
    out << "layer " << u.layer << (u.backward ? " bwd:" : " fwd:");
    for (const TokenDecision &s : u.steps) {
      out << ' ';
      if (s.decision == Decision::kSkim) {
        out << s.token;
      } else if (color) {
        out << "\x1b[34m" << s.token << "\x1b[0m";
      } else {
        out << '[' << s.token << ']';
      }
    }
    out << '\n';
  }
  char buf[80];
  std::snprintf(buf, sizeof(buf), "skim_rate=%.4f flop_r=%.4f\n", trace.skim_rate,
                trace.flop_r);
  out << buf;
}

int Run(const std::vector<std::string> &args, std::ostream &out,
        std::ostream &err) {
  CLI::App app{"Skim-RNN training, inference and benchmarking", "skimrnn"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int64_t> threads;
  app.add_option("--config", config_path, "flat JSON file with the verb's keys");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_option("--threads", threads, "worker threads; only 1 is supported");

  // Per-verb flags, copied into the config object when given.
  std::vector<std::pair<CLI::Option *, std::function<void(json &)>>> overrides;
  auto text = [&](CLI::App *cmd, const std::string &flag, const std::string &key,
                  const std::string &help) {
    auto value = std::make_shared<std::string>();
    CLI::Option *opt = cmd->add_option(flag, *value, help);
    overrides.push_back({opt, [value, key](json &j) { j[key] = *value; }});
  };
  auto number = [&](CLI::App *cmd, const std::string &flag, const std::string &key,
                    const std::string &help) {
    auto value = std::make_shared<double>();
    CLI::Option *opt = cmd->add_option(flag, *value, help);
    overrides.push_back({opt, [value, key](json &j) { j[key] = *value; }});
  };
  auto integer = [&](CLI::App *cmd, const std::string &flag, const std::string &key,
                     const std::string &help) {
    auto value = std::make_shared<int64_t>();
    CLI::Option *opt = cmd->add_option(flag, *value, help);
    overrides.push_back({opt, [value, key](json &j) { j[key] = *value; }});
  };
  auto flag = [&](CLI::App *cmd, const std::string &name, const std::string &key,
                  const std::string &help) {
    CLI::Option *opt = cmd->add_flag(name, help);
    overrides.push_back({opt, [key](json &j) { j[key] = true; }});
  };
  auto numbers = [&](CLI::App *cmd, const std::string &flag, const std::string &key,
                     const std::string &help) {
    auto value = std::make_shared<std::vector<double>>();
    CLI::Option *opt = cmd->add_option(flag, *value, help)->delimiter(',');
    overrides.push_back({opt, [value, key](json &j) { j[key] = *value; }});
  };
  auto strings = [&](CLI::App *cmd, const std::string &flag, const std::string &key,
                     const std::string &help) {
    auto value = std::make_shared<std::vector<std::string>>();
    CLI::Option *opt = cmd->add_option(flag, *value, help)->delimiter(',');
    overrides.push_back({opt, [value, key](json &j) { j[key] = *value; }});
  };

  CLI::App *train = app.add_subcommand("train", "train a model from a run config");

  CLI::App *eval = app.add_subcommand("eval", "evaluate a saved model");
  text(eval, "--model", "model", "weight file");
  text(eval, "--data", "data", "dataset file");
  text(eval, "--policy", "policy", "argmax, sample or threshold");
  number(eval, "--theta", "theta", "read iff p_read >= theta");
  flag(eval, "--skip", "skip", "skim steps leave the state unchanged");

  CLI::App *sweep = app.add_subcommand("sweep-threshold", "accuracy and skim rate per threshold");
  text(sweep, "--model", "model", "weight file");
  text(sweep, "--data", "data", "dataset file");
  numbers(sweep, "--thresholds", "thresholds", "comma-separated thresholds");
  flag(sweep, "--skip", "skip", "add a skip-mode sweep");

  CLI::App *trace = app.add_subcommand("trace", "per-token read/skim decisions");
  text(trace, "--model", "model", "weight file");
  text(trace, "--input", "input", "text to trace (the context for qa)");
  text(trace, "--input-file", "input_file", "one example per line");
  text(trace, "--question", "question", "question for a qa model");
  text(trace, "--policy", "policy", "argmax, sample or threshold");
  number(trace, "--theta", "theta", "read iff p_read >= theta");
  flag(trace, "--color", "color", "color read tokens instead of brackets");
  flag(trace, "--json", "json", "print JSON lines instead of the rendering");

  CLI::App *bench = app.add_subcommand("bench", "time skim steps against an LSTM");
  strings(bench, "--grid", "grid", "comma-separated d_in/d/d_small shapes");
  numbers(bench, "--skim-rates", "skim_rates", "comma-separated forced skim rates");
  integer(bench, "--length", "length", "tokens per trial");
  integer(bench, "--trials", "trials", "timed trials, at least 30");
  integer(bench, "--warmups", "warmups", "untimed trials, at least 5");

  CLI::App *gen = app.add_subcommand("gen-data", "write a synthetic dataset");
  text(gen, "--task", "task", "keyword or span");
  integer(gen, "--train-size", "train_size", "training examples");
  integer(gen, "--val-size", "val_size", "validation examples");
  integer(gen, "--test-size", "test_size", "test examples");
  integer(gen, "--length", "length", "keyword: tokens per example");
  integer(gen, "--context-length", "context_length", "span: context tokens");
  integer(gen, "--vocab-size", "vocab_size", "filler vocabulary size");
  integer(gen, "--num-keywords", "num_keywords", "keyword: distinct keywords");
  integer(gen, "--num-classes", "num_classes", "keyword: classes");
  integer(gen, "--num-keys", "num_keys", "span: distinct question keys");
  integer(gen, "--num-distractors", "num_distractors", "span: distractor spans");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    json j = config_path.empty() ? json::object() : ReadJson(config_path);
    if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
    if (seed) j["seed"] = *seed;
    if (out_dir) j["out_dir"] = *out_dir;
    if (threads) j["threads"] = *threads;
    for (const auto &[opt, apply] : overrides) {
      if (opt->count() > 0) apply(j);
    }
    if (train->parsed()) return CmdTrain(j, out);
    if (eval->parsed()) return CmdEval(j, out);
    if (sweep->parsed()) return CmdSweep(j, out, err);
    if (trace->parsed()) return CmdTrace(j, out);
    if (bench->parsed()) return CmdBench(j, out);
    if (gen->parsed()) return CmdGenData(j, out);
    return kExitUsage;
  } catch (const ConfigError &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace skimrnn::cli
