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

#ifndef SKIMRNN_TRACE_H_
#define SKIMRNN_TRACE_H_

#include <vector>

#include "skimrnn/skim_cell.h"

namespace skimrnn {

struct TraceStep {
  Decision decision = Decision::kRead;
  double p_read = 1.0;
  double p_skim = 0.0;
};

// Decisions of one recurrent unit (one layer and direction) over a
// sequence, in time order of the unit's own traversal.
struct DecisionTrace {
  std::vector<TraceStep> steps;

  size_t size() const { return steps.size(); }
  bool empty() const { return steps.empty(); }
  void Add(Decision d, double p_read, double p_skim) {
    steps.push_back(TraceStep{d, p_read, p_skim});
  }
};

}  // namespace skimrnn

#endif  // SKIMRNN_TRACE_H_
