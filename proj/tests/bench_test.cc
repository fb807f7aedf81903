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

#include "skimrnn/bench.h"

#include <algorithm>
#include <sstream>

#include "gtest/gtest.h"
#include "skimrnn/errors.h"
#include "skimrnn/flops.h"

namespace skimrnn {
namespace {

TEST(BenchTest, ForcedPatternHitsRequestedRate) {
  Rng rng(1);
  for (double rate : {0.0, 0.25, 0.5, 0.9, 1.0}) {
    auto p = ForcedPattern(100, rate, rng);
    ASSERT_EQ(p.size(), 100u);
    EXPECT_EQ(std::count(p.begin(), p.end(), Decision::kSkim),
              static_cast<long>(rate * 100));
  }
}

TEST(BenchTest, MedianAndMad) {
  EXPECT_EQ(Median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(Median({4.0, 1.0, 3.0, 2.0}), 2.5);
  // |x - 3| = {2, 1, 0, 1, 97} -> median 1.
  EXPECT_EQ(MedianAbsoluteDeviation({1.0, 2.0, 3.0, 4.0, 100.0}), 1.0);
  EXPECT_THROW(Median({}), ContractError);
}

TEST(BenchTest, RunsSingleThreaded) { EXPECT_EQ(CountThreads(), 1u); }

TEST(BenchTest, ValidationRejectsTooFewTrials) {
  BenchOptions o;
  o.grid = {{8, 8, 2}};
  o.skim_rates = {0.5};
  o.trials = 1;
  EXPECT_THROW(RunBenchmark(o), ContractError);
  o.trials = 30;
  o.warmups = 4;
  EXPECT_THROW(o.Validate(), ContractError);
  o.warmups = 5;
  o.skim_rates = {1.5};
  EXPECT_THROW(o.Validate(), ContractError);
  o.skim_rates = {0.5};
  o.grid = {{8, 8, 9}};
  EXPECT_THROW(o.Validate(), ContractError);
}

TEST(BenchTest, GridCardinalityAndColumns) {
  BenchOptions o;
  o.grid = {{16, 16, 2}, {16, 32, 4}};
  o.skim_rates = {0.0, 0.5, 0.9};
  BenchReport r = RunBenchmark(o);
  ASSERT_EQ(r.rows.size(), 6u);
  EXPECT_EQ(r.trials, 30);
  EXPECT_EQ(r.warmups, 5);
  for (size_t i = 0; i < r.rows.size(); ++i) {
    const BenchRow &row = r.rows[i];
    EXPECT_EQ(row.shape.d, i < 3 ? 16u : 32u);
    EXPECT_DOUBLE_EQ(row.skim_rate, o.skim_rates[i % 3]);
    EXPECT_GT(row.median_us_per_token, 0.0);
    EXPECT_DOUBLE_EQ(row.flop_r, FlopReductionAtRate(row.skim_rate,
                                                     SkimConfig{row.shape.d_in, row.shape.d,
                                                                row.shape.d_small, 2}));
  }
  std::ostringstream wide, lng;
  WriteBenchCsv(wide, r);
  WriteBenchLongCsv(lng, r);
  const std::string w = wide.str(), l = lng.str();
  EXPECT_EQ(w.substr(0, w.find('\n')),
            "d_in,d,d_small,skim_rate,median_us_per_token,speedup,flop_r,"
            "mad_us_per_token,speedup_mad,baseline_us_per_token");
  EXPECT_EQ(std::count(w.begin(), w.end(), '\n'), 7);
  EXPECT_EQ(l.substr(0, l.find('\n')), "config,skim_rate,metric,value");
  EXPECT_NE(l.find("16/32/4,0.9,speedup,"), std::string::npos);
}

TEST(BenchTest, DegenerateSmallCellGivesNoSpeedup) {
  BenchOptions o;
  o.grid = {{64, 64, 64}};
  o.skim_rates = {0.5};
  BenchReport r = RunBenchmark(o);
  EXPECT_NEAR(r.rows[0].speedup, 1.0, 0.15);
  EXPECT_LT(r.rows[0].flop_r, 1.0);
}

}  // namespace
}  // namespace skimrnn
