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
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "skimrnn/errors.h"
#include "skimrnn/flops.h"
#include "skimrnn/lstm.h"
#include "skimrnn/trace.h"

namespace skimrnn {

namespace {

using Clock = std::chrono::steady_clock;

// Smallest observable tick of the clock, in nanoseconds.
double ClockResolutionNs() {
  double best = 1e9;
  for (int i = 0; i < 20; ++i) {
    const auto a = Clock::now();
    auto b = Clock::now();
    while (b == a) b = Clock::now();
    best = std::min(best, std::chrono::duration<double, std::nano>(b - a).count());
  }
  return best;
}

// Unit weights for any 0 <= d_small <= d.
SkimUnitParams BenchUnit(const BenchShape &s, Rng &rng) {
  SkimUnitParams p;
  p.d_in = s.d_in;
  p.d = s.d;
  p.d_small = s.d_small;
  p.big = LstmParams::Zeros(s.d_in, s.d, s.d);
  p.small = LstmParams::Zeros(s.d_in, s.d_small, s.d);
  p.big.Initialize(rng);
  p.small.Initialize(rng);
  p.decision_w = Tensor(Shape{kNumChoices, s.d_in + s.d});
  p.decision_b = Tensor(Shape{kNumChoices});
  for (double &w : p.decision_w.data()) w = rng.Uniform(-0.1, 0.1);
  return p;
}

std::string Fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

volatile double g_sink = 0.0;

}  // namespace

void BenchOptions::Validate() const {
  if (trials < kMinTrials) {
    throw ContractError("bench: trials must be >= " + std::to_string(kMinTrials) +
                        ", got " + std::to_string(trials));
  }
  if (warmups < kMinWarmups) {
    throw ContractError("bench: warmups must be >= " +
                        std::to_string(kMinWarmups) + ", got " +
                        std::to_string(warmups));
  }
  if (grid.empty()) throw ContractError("bench: empty configuration grid");
  if (skim_rates.empty()) throw ContractError("bench: no skim rates");
  if (length == 0) throw ContractError("bench: length must be positive");
  for (double r : skim_rates) {
    if (!(r >= 0.0 && r <= 1.0)) {
      throw ContractError("bench: skim rate " + std::to_string(r) +
                          " outside [0, 1]");
    }
  }
  for (const BenchShape &s : grid) {
    if (s.d == 0 || s.d_small > s.d) {
      throw ContractError("bench: need 0 <= d_small <= d and d > 0");
    }
  }
}

std::vector<Decision> ForcedPattern(size_t length, double skim_rate, Rng &rng) {
  const auto skims = static_cast<size_t>(std::llround(skim_rate * length));
  std::vector<Decision> pattern(length, Decision::kRead);
  std::fill_n(pattern.begin(), std::min(skims, length), Decision::kSkim);
  std::shuffle(pattern.begin(), pattern.end(), rng.engine());
  return pattern;
}

size_t CountThreads() {
  std::error_code ec;
  std::filesystem::directory_iterator it("/proc/self/task", ec);
  if (ec) return 0;
  size_t n = 0;
  for (; it != std::filesystem::directory_iterator(); it.increment(ec)) {
    if (ec) return 0;
    ++n;
  }
  return n;
}

double Median(std::vector<double> values) {
  if (values.empty()) throw ContractError("median of empty sample");
  const size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

double MedianAbsoluteDeviation(const std::vector<double> &values) {
  const double m = Median(values);
  std::vector<double> dev(values.size());
  for (size_t i = 0; i < values.size(); ++i) dev[i] = std::abs(values[i] - m);
  return Median(std::move(dev));
}

BenchReport RunBenchmark(const BenchOptions &options) {
  options.Validate();
  const size_t threads = CountThreads();
  if (threads > 1) {
    throw BenchmarkError("bench: " + std::to_string(threads) +
                         " threads running; timing requires a single thread");
  }
  const double min_trial_ns = 100.0 * ClockResolutionNs();
  Rng rng(options.seed);
  const size_t L = options.length;

  BenchReport report;
  report.trials = options.trials;
  report.warmups = options.warmups;
  report.length = L;

  for (const BenchShape &shape : options.grid) {
    SkimUnitParams unit = BenchUnit(shape, rng);
    std::vector<double> inputs(L * shape.d_in);
    for (double &x : inputs) x = rng.Uniform(-1.0, 1.0);
    std::vector<double> h(shape.d), c(shape.d);
    SkimWorkspace ws;
    auto x_at = [&](size_t t) {
      return std::span<const double>(inputs).subspan(t * shape.d_in, shape.d_in);
    };
    auto time_ns = [&](auto &&body) {
      std::fill(h.begin(), h.end(), 0.0);
      std::fill(c.begin(), c.end(), 0.0);
      const auto start = Clock::now();
      body();
      const double ns =
          std::chrono::duration<double, std::nano>(Clock::now() - start).count();
      g_sink = g_sink + h[0];
      if (ns < min_trial_ns) {
        throw BenchmarkError("bench: trial took " + Fmt(ns) +
                             " ns, too short for the clock; use a larger length");
      }
      return ns;
    };
    auto baseline = [&] {
      for (size_t t = 0; t < L; ++t) {
        LstmStep(unit.big, x_at(t), h, c, h, c, ws.lstm);
      }
    };

    for (double rate : options.skim_rates) {
      const std::vector<Decision> pattern = ForcedPattern(L, rate, rng);
      auto skim = [&] {
        for (size_t t = 0; t < L; ++t) {
          SkimStepHardInPlace(unit, x_at(t), h, c, ForcedPolicy{pattern[t]}, ws);
        }
      };
      for (int i = 0; i < options.warmups; ++i) {
        time_ns(baseline);
        time_ns(skim);
      }
      std::vector<double> base_us, skim_us, ratios;
      for (int i = 0; i < options.trials; ++i) {
        const double b = time_ns(baseline);
        const double s = time_ns(skim);
        base_us.push_back(b / 1000.0 / static_cast<double>(L));
        skim_us.push_back(s / 1000.0 / static_cast<double>(L));
        ratios.push_back(b / s);
      }
      DecisionTrace trace;
      for (Decision d : pattern) trace.Add(d, 0.5, 0.5);

      BenchRow row;
      row.shape = shape;
      row.skim_rate = SkimRate(trace);
      row.median_us_per_token = Median(skim_us);
      row.mad_us_per_token = MedianAbsoluteDeviation(skim_us);
      row.baseline_us_per_token = Median(base_us);
      row.speedup = row.baseline_us_per_token / row.median_us_per_token;
      row.speedup_mad = MedianAbsoluteDeviation(ratios);
      row.flop_r = FlopReduction(
          trace, SkimConfig{shape.d_in, shape.d, shape.d_small, kNumChoices});
      report.rows.push_back(row);
    }
  }
  return report;
}

void WriteBenchCsv(std::ostream &out, const BenchReport &report) {
  out << "d_in,d,d_small,skim_rate,median_us_per_token,speedup,flop_r,"
         "mad_us_per_token,speedup_mad,baseline_us_per_token\n";
  for (const BenchRow &r : report.rows) {
    out << r.shape.d_in << ',' << r.shape.d << ',' << r.shape.d_small << ','
        << Fmt(r.skim_rate) << ',' << Fmt(r.median_us_per_token) << ','
        << Fmt(r.speedup) << ',' << Fmt(r.flop_r) << ','
        << Fmt(r.mad_us_per_token) << ',' << Fmt(r.speedup_mad) << ','
        << Fmt(r.baseline_us_per_token) << '\n';
  }
}

void WriteBenchLongCsv(std::ostream &out, const BenchReport &report) {
  out << "config,skim_rate,metric,value\n";
  for (const BenchRow &r : report.rows) {
    const std::string config = std::to_string(r.shape.d_in) + "/" +
                               std::to_string(r.shape.d) + "/" +
                               std::to_string(r.shape.d_small);
    const std::pair<const char *, double> metrics[] = {
        {"median_us_per_token", r.median_us_per_token},
        {"mad_us_per_token", r.mad_us_per_token},
        {"baseline_us_per_token", r.baseline_us_per_token},
        {"speedup", r.speedup},
        {"speedup_mad", r.speedup_mad},
        {"flop_r", r.flop_r}};
    for (const auto &[name, value] : metrics) {
      out << config << ',' << Fmt(r.skim_rate) << ',' << name << ','
          << Fmt(value) << '\n';
    }
  }
}

}  // namespace skimrnn
