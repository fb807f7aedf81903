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


#ifndef SKIMRNN_CLI_H_
#define SKIMRNN_CLI_H_

// Command-line verbs, callable in-process:
//
//   train            --config run.json   -> model.bin, history.csv, summary.json
//   eval             --model --data      -> JSON summary on stdout
//   sweep-threshold  --model --data      -> mode,theta,metric,skim_rate,flop_r
//   trace            --model --input     -> bracketed rendering, trace.jsonl
//   bench                                -> bench.csv, bench_long.csv
//   gen-data         --task              -> {train,val,test}.{tsv,jsonl}
//
// Global flags --config, --seed, --out-dir and --threads apply to every
// verb. A config file is one flat JSON object whose keys are the verb's
// long flag names with '-' spelled '_'; flags given on the command line
// win. Unknown keys are rejected.
//
// Exit codes: 0 success, 2 usage or config error (nothing written),
// 3 runtime or training error.

#include <cstddef>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "skimrnn/models.h"
#include "skimrnn/training.h"
#include "skimrnn/weight_file.h"

namespace skimrnn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

// args excludes the program name.
int Run(const std::vector<std::string> &args, std::ostream &out,
        std::ostream &err);

struct RunConfig {
  std::string task = "classifier";  // or "qa"
  RnnKind rnn = RnnKind::kSkim;
  size_t d_in = 50;
  size_t d = 50;
  size_t d_small = 5;
  std::string train_path;
  std::string val_path;
  std::string test_path;  // optional; the summary falls back to val
  std::string embeddings_path;
  bool freeze_embeddings = false;
  bool split_punct = false;
  std::string out_dir;
  // Final evaluation: "argmax", "sample" or "threshold".
  std::string policy = "argmax";
  double theta = 0.5;
  int threads = 1;
  TrainConfig train;  // anneal_rate and tau_floor set train.schedule
};

// Throws ConfigError naming the first unknown, mistyped or invalid key.
RunConfig ParseRunConfig(std::string_view json_text);

struct TokenDecision {
  size_t position = 0;
  std::string token;
  Decision decision = Decision::kRead;
  double p_read = 1.0;
  double p_skim = 0.0;
};

// One layer and direction, in position order.
struct UnitTrace {
  int layer = 0;
  bool backward = false;
  std::vector<TokenDecision> steps;
};

struct AnnotatedTrace {
  std::vector<UnitTrace> units;
  double skim_rate = 0.0;
  double flop_r = 1.0;
};

// Hard inference over already tokenized text. Unknown tokens run as <unk>
// but keep their surface form in the trace.
AnnotatedTrace TraceClassifier(const ModelBundle &bundle,
                               const std::vector<std::string> &tokens,
                               const InferenceOptions &opts);
AnnotatedTrace TraceQa(const ModelBundle &bundle,
                       const std::vector<std::string> &context,
                       const std::vector<std::string> &question,
                       const InferenceOptions &opts);

// One object per token: example, layer, direction, position, token,
// decision, p_read, p_skim; then one aggregate object with skim_rate,
// flop_r and tokens.
void WriteTraceJsonl(std::ostream &out, const AnnotatedTrace &trace,
                     size_t example);

// One line per unit with read tokens in brackets (or blue with color),
// then "skim_rate=<r> flop_r=<f>".
void RenderTrace(std::ostream &out, const AnnotatedTrace &trace, bool color);

}  // namespace skimrnn::cli

#endif  // SKIMRNN_CLI_H_
