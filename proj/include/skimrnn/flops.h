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

#ifndef SKIMRNN_FLOPS_H_
#define SKIMRNN_FLOPS_H_

// Closed-form flop accounting. Multiplies and adds count separately and each
// scalar nonlinearity counts as one flop:
//
//   lstm step        8 d_out (d_in + d_read)   gate matvec
//                  + 4 d_out                   bias add
//                  + 4 d_out                   3 sigmoids + 1 tanh per unit
//                  + 5 d_out                   f*c, i*g, add, tanh(c), o*tanh
//   decision         2 k (d_in + d) + k        matvec and bias
//                  + 4 k                       softmax: sub, exp, sum, div
//
// The raw kernels count with the same convention at runtime (FlopCounter),
// so instrumented totals must equal these formulas exactly.

#include <cstddef>
#include <cstdint>
#include <span>

#include "skimrnn/skim_cell.h"
#include "skimrnn/trace.h"

namespace skimrnn {

struct SkimConfig {
  size_t d_in = 0;
  size_t d = 0;
  size_t d_small = 0;
  size_t k = kNumChoices;
};

int64_t FlopsLstmStep(size_t d_in, size_t d_out, size_t d_read);
int64_t FlopsDecision(const SkimConfig &cfg);
// Decision overhead plus the cell of the taken branch.
int64_t FlopsSkimStep(const SkimConfig &cfg, Decision decision);

// Fraction of skimmed steps. Throws ContractError on an empty trace.
double SkimRate(const DecisionTrace &trace);
double SkimRate(std::span<const DecisionTrace> traces);

// Standard-LSTM flops over skim-model flops for the same sequence.
double FlopReduction(const DecisionTrace &trace, const SkimConfig &cfg);

// Flop-R of an expected decision mix with the given skim rate.
double FlopReductionAtRate(double skim_rate, const SkimConfig &cfg);

// Running closed-form totals per step kind.
class FlopLedger {
 public:
  explicit FlopLedger(SkimConfig cfg) : cfg_(cfg) {}

  void Record(Decision decision);
  void RecordTrace(const DecisionTrace &trace);

  const SkimConfig &config() const { return cfg_; }
  int64_t read_steps() const { return read_steps_; }
  int64_t skim_steps() const { return skim_steps_; }
  int64_t steps() const { return read_steps_ + skim_steps_; }
  int64_t read_flops() const { return read_flops_; }
  int64_t skim_flops() const { return skim_flops_; }
  int64_t decision_flops() const { return decision_flops_; }
  int64_t total() const { return read_flops_ + skim_flops_ + decision_flops_; }
  // Cost of running a standard LSTM over the same number of steps.
  int64_t baseline_total() const;
  double flop_reduction() const;

 private:
  SkimConfig cfg_;
  int64_t read_steps_ = 0;
  int64_t skim_steps_ = 0;
  int64_t read_flops_ = 0;
  int64_t skim_flops_ = 0;
  int64_t decision_flops_ = 0;
};

}  // namespace skimrnn

#endif  // SKIMRNN_FLOPS_H_
