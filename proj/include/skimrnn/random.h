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

#ifndef SKIMRNN_RANDOM_H_
#define SKIMRNN_RANDOM_H_

#include <cstddef>
#include <cstdint>
#include <random>

namespace skimrnn {

// Seeded pseudo-random stream. Every consumer of randomness takes one of
// these explicitly; concurrent sequences must own independent streams.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : engine_(seed) {}

  // Uniform double in [0, 1) with 53 random bits.
  double Uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  double Normal(double mean, double stddev) {
    std::normal_distribution<double> dist(mean, stddev);
    return dist(engine_);
  }

  // Uniform integer in [0, n).
  size_t Index(size_t n) {
    std::uniform_int_distribution<size_t> dist(0, n - 1);
    return dist(engine_);
  }

  uint64_t Next() { return engine_(); }

  // Derives an independent child stream, e.g. one per worker or per seed.
  Rng Fork() { return Rng(engine_() ^ 0x9e3779b97f4a7c15ULL); }

  std::mt19937_64 &engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace skimrnn

#endif  // SKIMRNN_RANDOM_H_
