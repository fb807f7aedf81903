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

#include "skimrnn/objective.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "skimrnn/errors.h"
#include "skimrnn/skim_cell.h"

namespace skimrnn {

double SkimLoss(double task_loss, std::span<const double> p_skim, double gamma) {
  if (p_skim.empty()) throw ContractError("skim_loss: empty sequence");
  if (!(gamma >= 0.0)) {
    throw ContractError("skim_loss: gamma must be >= 0, got " + std::to_string(gamma));
  }
  if (gamma == 0.0) return task_loss;
  double sum = 0.0;
  for (double p : p_skim) sum += -std::log(std::max(p, kProbFloor));
  return task_loss + gamma * (sum / static_cast<double>(p_skim.size()));
}

Var MeanNegLogSkim(Tape &tape, std::span<const Var> probs) {
  if (probs.empty()) throw ContractError("skim_loss: empty sequence");
  Var total;
  for (Var p : probs) {
    Var term = tape.Log(tape.ClampMin(tape.Slice(p, 1, 2), kProbFloor));
    total = total.valid() ? tape.Add(total, term) : term;
  }
  return tape.Scale(tape.Sum(total), -1.0 / static_cast<double>(probs.size()));
}

}  // namespace skimrnn
