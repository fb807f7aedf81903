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

#ifndef SKIMRNN_OBJECTIVE_H_
#define SKIMRNN_OBJECTIVE_H_

#include <span>

#include "skimrnn/random.h"
#include "skimrnn/tape.h"

namespace skimrnn {

enum class TrainMode {
  // Every unit takes the hard read branch; no noise, no skim loss.
  kForcedRead,
  // Gumbel-softmax relaxed steps plus the skim loss.
  kRelaxed,
};

struct TrainContext {
  TrainMode mode = TrainMode::kRelaxed;
  double tau = 1.0;
  double gamma = 0.0;
  Rng *rng = nullptr;
};

struct LossParts {
  double task = 0.0;
  // Mean negative log skim probability, before the gamma scaling.
  double skim = 0.0;
  double total = 0.0;
};

// L + gamma * mean_t(-log max(p_skim_t, 1e-12)). Throws ContractError for an
// empty sequence or negative gamma.
double SkimLoss(double task_loss, std::span<const double> p_skim, double gamma);

// Recorded mean_t(-log max(p_t[1], 1e-12)) over decision probability
// vectors [p_read, p_skim]. Unscaled; multiply by gamma at the call site.
Var MeanNegLogSkim(Tape &tape, std::span<const Var> probs);

}  // namespace skimrnn

#endif  // SKIMRNN_OBJECTIVE_H_
