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

#include "skimrnn/expected_loss.h"

#include <cmath>
#include <string>

#include "skimrnn/errors.h"

namespace skimrnn {

double ExpectedLossByEnumeration(size_t length, const HardRunFn &run) {
  if (length == 0) throw ContractError("expected_loss: empty sequence");
  if (length > kMaxEnumerationLength) {
    throw ContractError("expected_loss: refusing to enumerate 2^" +
                        std::to_string(length) + " decision sequences (max " +
                        std::to_string(kMaxEnumerationLength) + " steps)");
  }
  std::vector<Decision> q(length);
  double total = 0.0;
  for (uint32_t mask = 0; mask < (1u << length); ++mask) {
    for (size_t t = 0; t < length; ++t) {
      q[t] = (mask >> t) & 1u ? Decision::kSkim : Decision::kRead;
    }
    HardRun r = run(q);
    if (r.p.size() != length) {
      throw DimensionError("expected_loss: run returned " +
                           std::to_string(r.p.size()) + " steps, expected " +
                           std::to_string(length));
    }
    double weight = 1.0;
    for (size_t t = 0; t < length; ++t) {
      weight *= r.p[t][q[t] == Decision::kRead ? 0 : 1];
    }
    total += weight * r.loss;
  }
  return total;
}

namespace {

// Runs the classifier with a per-step policy and returns the label NLL.
template <typename PolicyAt>
HardRun RunClassifier(const ClassifierModel &model,
                      std::span<const int32_t> ids, int32_t label,
                      PolicyAt policy_at) {
  if (ids.empty()) throw ContractError("expected_loss: empty sequence");
  const size_t d = model.d;
  std::vector<double> h(d, 0.0), c(d, 0.0);
  SkimWorkspace ws;
  HardRun run;
  for (size_t t = 0; t < ids.size(); ++t) {
    const size_t id = static_cast<size_t>(ids[t]);
    if (id >= model.vocab_size) {
      throw IndexError("token id " + std::to_string(ids[t]) +
                       " outside vocabulary");
    }
    auto x = model.embedding.data().subspan(id * model.d_in, model.d_in);
    std::array<double, kNumChoices> p{};
    SkimStepHardInPlace(model.unit, x, h, c, policy_at(t), ws, nullptr, &p);
    run.p.push_back(p);
  }
  std::vector<double> logits(model.num_classes), logp(model.num_classes);
  kernels::MatVec(model.proj_w.data(), model.num_classes, d, h, logits, nullptr);
  kernels::Add(logits, model.proj_b.data(), logits, nullptr);
  kernels::LogSoftmax(logits, logp);
  run.loss = -logp.at(static_cast<size_t>(label));
  return run;
}

}  // namespace

HardRun ClassifierHardRun(const ClassifierModel &model,
                          std::span<const int32_t> ids, int32_t label,
                          std::span<const Decision> decisions) {
  if (decisions.size() != ids.size()) {
    throw DimensionError("expected_loss: one decision per token required");
  }
  return RunClassifier(model, ids, label, [&](size_t t) -> DecisionPolicy {
    return ForcedPolicy{decisions[t]};
  });
}

double ExpectedLossBruteForce(const ClassifierModel &model,
                              std::span<const int32_t> ids, int32_t label) {
  return ExpectedLossByEnumeration(
      ids.size(), [&](std::span<const Decision> q) {
        return ClassifierHardRun(model, ids, label, q);
      });
}

MonteCarloEstimate ExpectedLossMonteCarlo(const ClassifierModel &model,
                                          std::span<const int32_t> ids,
                                          int32_t label, int64_t samples,
                                          Rng &rng) {
  if (samples < 2) throw ContractError("monte carlo: need at least 2 samples");
  const DecisionPolicy policy = SamplePolicy{&rng};
  double sum = 0.0, sum_sq = 0.0;
  for (int64_t s = 0; s < samples; ++s) {
    const double loss =
        RunClassifier(model, ids, label, [&](size_t) { return policy; }).loss;
    sum += loss;
    sum_sq += loss * loss;
  }
  const double n = static_cast<double>(samples);
  MonteCarloEstimate est;
  est.samples = samples;
  est.mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1.0));
  est.std_error = std::sqrt(var / n);
  return est;
}

}  // namespace skimrnn
