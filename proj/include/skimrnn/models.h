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

#ifndef SKIMRNN_MODELS_H_
#define SKIMRNN_MODELS_H_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "skimrnn/flops.h"
#include "skimrnn/objective.h"
#include "skimrnn/random.h"
#include "skimrnn/skim_cell.h"
#include "skimrnn/tape.h"
#include "skimrnn/tensor.h"
#include "skimrnn/trace.h"

namespace skimrnn {

// Which recurrent unit a model runs. kLstm uses only the big cell of the
// unit and never evaluates the decision network.
enum class RnnKind : uint8_t { kLstm, kSkim };

const char *RnnKindName(RnnKind kind);
// Accepts "lstm" and "skim". Throws ContractError otherwise.
RnnKind ParseRnnKind(std::string_view name);

struct InferenceOptions {
  DecisionPolicy policy = ArgmaxPolicy{};
  // Skim steps leave the state untouched (d_small treated as 0).
  bool skip_on_skim = false;
  FlopCounter *counter = nullptr;
};

using NamedTensor = std::pair<std::string, Tensor *>;

// How a recorded unit run chooses its branch.
enum class StepMode { kHard, kForcedRead, kRelaxed };

struct UnitRunConfig {
  StepMode mode = StepMode::kHard;
  DecisionPolicy policy = ArgmaxPolicy{};
  bool skip_on_skim = false;
  double tau = 1.0;
  Rng *rng = nullptr;  // kRelaxed draws its Gumbel noise here
};

struct UnitRun {
  std::vector<Var> h;      // per position
  std::vector<Var> probs;  // per position; empty for kLstm
  DecisionTrace trace;     // per position
  TapeState last;          // state after the final step of the traversal
};

// Runs one unit over inputs on the tape, forward or in reverse. Outputs and
// trace are indexed by input position whatever the direction. Relaxed runs
// record the argmax of r as the trace decision.
UnitRun RunUnit(Tape &tape, const SkimUnitVars &vars, RnnKind kind,
                std::span<const Var> inputs, const UnitRunConfig &config,
                bool reverse = false);

UnitRunConfig ConfigFor(const TrainContext &ctx);

struct ClassifyResult {
  std::vector<double> probs;
  DecisionTrace trace;
};

class ClassifierModel {
 public:
  RnnKind kind = RnnKind::kSkim;
  size_t vocab_size = 0;
  size_t d_in = 0;
  size_t d = 0;
  size_t d_small = 0;
  size_t num_classes = 0;
  bool freeze_embeddings = false;

  Tensor embedding;  // [vocab_size, d_in]
  SkimUnitParams unit;
  Tensor proj_w;  // [num_classes, d]
  Tensor proj_b;  // [num_classes]

  // Zero weights. Throws ContractError for vocab_size < 1 or fewer than two
  // classes.
  static ClassifierModel Zeros(RnnKind kind, size_t vocab_size, size_t d_in,
                               size_t d, size_t d_small, size_t num_classes);
  static ClassifierModel Create(RnnKind kind, size_t vocab_size, size_t d_in,
                                size_t d, size_t d_small, size_t num_classes,
                                Rng &rng);

  // Unrecorded inference. Throws IndexError for an id >= vocab_size and
  // ContractError for an empty sequence.
  ClassifyResult Classify(std::span<const int32_t> ids,
                          const InferenceOptions &opts = {}) const;

  // Recorded negative log likelihood of label, plus gamma times the skim
  // loss in relaxed mode.
  Var Loss(Tape &tape, std::span<const int32_t> ids, int32_t label,
           const TrainContext &ctx, LossParts *parts = nullptr);

  // Trainable tensors, in a fixed order.
  std::vector<NamedTensor> Parameters();
  // Every tensor, trainable or not, in a fixed order.
  std::vector<NamedTensor> Tensors();

  SkimConfig flop_config() const { return SkimConfig{d_in, d, d_small, kNumChoices}; }

 private:
  void CheckIds(std::span<const int32_t> ids) const;
};

struct QaResult {
  std::vector<double> start_probs;
  std::vector<double> end_probs;
  // Layer-major: {l0 forward, l0 backward, l1 forward, l1 backward}.
  std::array<DecisionTrace, 4> traces;
};

class QaAttentionModel {
 public:
  static constexpr size_t kNumUnits = 4;

  RnnKind kind = RnnKind::kSkim;
  size_t vocab_size = 0;
  size_t d_in = 0;
  size_t d = 0;
  size_t d_small = 0;
  bool freeze_embeddings = false;

  Tensor embedding;    // [vocab_size, d_in]
  Tensor attention_w;  // [3 * d_in]
  // Layer 0 reads [x; u; x * u] (3 * d_in); layer 1 reads [fwd; bwd] (2 * d).
  std::array<SkimUnitParams, kNumUnits> units;
  Tensor start_w;  // [2 * d]
  Tensor end_w;    // [2 * d]

  static QaAttentionModel Zeros(RnnKind kind, size_t vocab_size, size_t d_in,
                                size_t d, size_t d_small);
  static QaAttentionModel Create(RnnKind kind, size_t vocab_size, size_t d_in,
                                 size_t d, size_t d_small, Rng &rng);

  // Throws ContractError for an empty context or question and IndexError for
  // an id >= vocab_size.
  QaResult Attend(std::span<const int32_t> context,
                  std::span<const int32_t> question,
                  const InferenceOptions &opts = {}) const;

  // Attention weights over question words for every context position.
  std::vector<std::vector<double>> AttentionWeights(
      std::span<const int32_t> context,
      std::span<const int32_t> question) const;

  // -log p_start(start) - log p_end(end), plus gamma times the skim loss
  // averaged over the four units in relaxed mode.
  Var Loss(Tape &tape, std::span<const int32_t> context,
           std::span<const int32_t> question, size_t start, size_t end,
           const TrainContext &ctx, LossParts *parts = nullptr);

  std::vector<NamedTensor> Parameters();
  std::vector<NamedTensor> Tensors();

  SkimConfig flop_config(size_t unit) const;

 private:
  void CheckIds(std::span<const int32_t> ids) const;
};

// Span (s, e) maximizing start[s] * end[e] over s <= e <= s + max_span.
// Ties keep the smallest s, then the smallest e.
std::pair<size_t, size_t> AnswerSpan(std::span<const double> start,
                                     std::span<const double> end,
                                     size_t max_span = 10);

// Token-position overlap F1 between two inclusive spans.
double SpanF1(std::pair<size_t, size_t> predicted,
              std::pair<size_t, size_t> gold);

}  // namespace skimrnn

#endif  // SKIMRNN_MODELS_H_
