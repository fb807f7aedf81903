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

#ifndef SKIMRNN_EXPECTED_LOSS_H_
#define SKIMRNN_EXPECTED_LOSS_H_

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "skimrnn/models.h"
#include "skimrnn/random.h"
#include "skimrnn/skim_cell.h"

namespace skimrnn {

inline constexpr size_t kMaxEnumerationLength = 12;

// Outcome of one hard run along a fixed decision sequence.
struct HardRun {
  double loss = 0.0;
  // Decision probabilities seen at each step along that trajectory.
  std::vector<std::array<double, kNumChoices>> p;
};

using HardRunFn = std::function<HardRun(std::span<const Decision>)>;

// Sum over all 2^length decision sequences Q of loss(Q) * prod_t p_t[Q_t].
// Throws ContractError when length exceeds kMaxEnumerationLength.
double ExpectedLossByEnumeration(size_t length, const HardRunFn &run);

// Classifier negative log likelihood along a forced decision sequence.
HardRun ClassifierHardRun(const ClassifierModel &model,
                          std::span<const int32_t> ids, int32_t label,
                          std::span<const Decision> decisions);

double ExpectedLossBruteForce(const ClassifierModel &model,
                              std::span<const int32_t> ids, int32_t label);

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int64_t samples = 0;
};

// Mean loss over hard runs whose decisions are sampled from p_t.
MonteCarloEstimate ExpectedLossMonteCarlo(const ClassifierModel &model,
                                          std::span<const int32_t> ids,
                                          int32_t label, int64_t samples,
                                          Rng &rng);

}  // namespace skimrnn

#endif  // SKIMRNN_EXPECTED_LOSS_H_
