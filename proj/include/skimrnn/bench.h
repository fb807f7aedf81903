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

#ifndef SKIMRNN_BENCH_H_
#define SKIMRNN_BENCH_H_

#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "skimrnn/random.h"
#include "skimrnn/skim_cell.h"

namespace skimrnn {

inline constexpr int kMinTrials = 30;
inline constexpr int kMinWarmups = 5;

struct BenchShape {
  size_t d_in = 0;
  size_t d = 0;
  // May equal d here (the degenerate case), unlike in trained models.
  size_t d_small = 0;
};

struct BenchOptions {
  std::vector<BenchShape> grid;
  std::vector<double> skim_rates;
  size_t length = 100;
  int trials = kMinTrials;
  int warmups = kMinWarmups;
  uint64_t seed = 0;

  // Throws ContractError for too few trials or warmups, an empty grid,
  // a rate outside [0, 1], or d_small > d.
  void Validate() const;
};

struct BenchRow {
  BenchShape shape;
  double skim_rate = 0.0;  // realized fraction of forced skims
  double median_us_per_token = 0.0;
  double mad_us_per_token = 0.0;
  double baseline_us_per_token = 0.0;
  // Baseline median over skim median, and the median absolute deviation
  // of the per-trial ratios.
  double speedup = 0.0;
  double speedup_mad = 0.0;
  double flop_r = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  int trials = 0;
  int warmups = 0;
  size_t length = 0;
};

// Exactly round(rate * length) skims at seeded random positions.
std::vector<Decision> ForcedPattern(size_t length, double skim_rate, Rng &rng);

// Threads in this process, from /proc/self/task; 0 if unavailable.
size_t CountThreads();

double Median(std::vector<double> values);
double MedianAbsoluteDeviation(const std::vector<double> &values);

// Times hard steps along forced decision patterns against a plain LSTM of
// width d over the same inputs, one row per (shape, rate) in grid order.
// Throws BenchmarkError when more than one thread is running or a trial is
// too short for the clock to resolve.
BenchReport RunBenchmark(const BenchOptions &options);

// d_in,d,d_small,skim_rate,median_us_per_token,speedup,flop_r plus the
// noise columns mad_us_per_token,speedup_mad,baseline_us_per_token.
void WriteBenchCsv(std::ostream &out, const BenchReport &report);
// config,skim_rate,metric,value with config as "d_in/d/d_small".
void WriteBenchLongCsv(std::ostream &out, const BenchReport &report);

}  // namespace skimrnn

#endif  // SKIMRNN_BENCH_H_
