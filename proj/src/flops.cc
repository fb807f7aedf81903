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

#include "skimrnn/flops.h"

#include "skimrnn/errors.h"

namespace skimrnn {

int64_t FlopsLstmStep(size_t d_in, size_t d_out, size_t d_read) {
  const int64_t out = static_cast<int64_t>(d_out);
  const int64_t width = static_cast<int64_t>(d_in + d_read);
  return 8 * out * width + 4 * out + 4 * out + 5 * out;
}

int64_t FlopsDecision(const SkimConfig &cfg) {
  const int64_t k = static_cast<int64_t>(cfg.k);
  return 2 * k * static_cast<int64_t>(cfg.d_in + cfg.d) + k + 4 * k;
}

int64_t FlopsSkimStep(const SkimConfig &cfg, Decision decision) {
  const size_t width = decision == Decision::kRead ? cfg.d : cfg.d_small;
  return FlopsDecision(cfg) + FlopsLstmStep(cfg.d_in, width, cfg.d);
}

double SkimRate(const DecisionTrace &trace) {
  if (trace.empty()) throw ContractError("skim_rate: empty trace");
  size_t skims = 0;
  for (const TraceStep &s : trace.steps) skims += s.decision == Decision::kSkim;
  return static_cast<double>(skims) / static_cast<double>(trace.size());
}

double SkimRate(std::span<const DecisionTrace> traces) {
  size_t skims = 0;
  size_t total = 0;
  for (const DecisionTrace &t : traces) {
    for (const TraceStep &s : t.steps) skims += s.decision == Decision::kSkim;
    total += t.size();
  }
  if (total == 0) throw ContractError("skim_rate: empty trace");
  return static_cast<double>(skims) / static_cast<double>(total);
}

double FlopReduction(const DecisionTrace &trace, const SkimConfig &cfg) {
  if (trace.empty()) throw ContractError("flop_reduction: empty trace");
  FlopLedger ledger(cfg);
  ledger.RecordTrace(trace);
  return ledger.flop_reduction();
}

double FlopReductionAtRate(double skim_rate, const SkimConfig &cfg) {
  const double read = static_cast<double>(FlopsSkimStep(cfg, Decision::kRead));
  const double skim = static_cast<double>(FlopsSkimStep(cfg, Decision::kSkim));
  const double base = static_cast<double>(FlopsLstmStep(cfg.d_in, cfg.d, cfg.d));
  return base / ((1.0 - skim_rate) * read + skim_rate * skim);
}

void FlopLedger::Record(Decision decision) {
  decision_flops_ += FlopsDecision(cfg_);
  if (decision == Decision::kRead) {
    ++read_steps_;
    read_flops_ += FlopsLstmStep(cfg_.d_in, cfg_.d, cfg_.d);
  } else {
    ++skim_steps_;
    skim_flops_ += FlopsLstmStep(cfg_.d_in, cfg_.d_small, cfg_.d);
  }
}

void FlopLedger::RecordTrace(const DecisionTrace &trace) {
  for (const TraceStep &s : trace.steps) Record(s.decision);
}

int64_t FlopLedger::baseline_total() const {
  return steps() * FlopsLstmStep(cfg_.d_in, cfg_.d, cfg_.d);
}

double FlopLedger::flop_reduction() const {
  if (steps() == 0) throw ContractError("flop_reduction: no steps recorded");
  return static_cast<double>(baseline_total()) / static_cast<double>(total());
}

}  // namespace skimrnn
