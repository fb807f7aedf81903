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

#ifndef SKIMRNN_KERNELS_H_
#define SKIMRNN_KERNELS_H_

// Span-level numeric kernels shared by the recorded (differentiable) path and
// the raw inference path. Both paths call exactly these functions so their
// results agree bitwise.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>

namespace skimrnn {

// Counts floating point operations as they execute. One flop per scalar
// multiply, add, or nonlinearity.
struct FlopCounter {
  int64_t flops = 0;
  void Add(int64_t n) { flops += n; }
};

namespace kernels {

inline void Count(FlopCounter *counter, int64_t n) {
  if (counter != nullptr) counter->Add(n);
}

// Four interleaved partial sums in a fixed order.
inline double Dot(const double *a, const double *b, size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    s0 += a[j] * b[j];
    s1 += a[j + 1] * b[j + 1];
    s2 += a[j + 2] * b[j + 2];
    s3 += a[j + 3] * b[j + 3];
  }
  for (; j < n; ++j) s0 += a[j] * b[j];
  return (s0 + s1) + (s2 + s3);
}

// out[i] = sum_j m[i, j] * v[j] for a rows x cols row-major matrix.
inline void MatVec(std::span<const double> m, size_t rows, size_t cols,
                   std::span<const double> v, std::span<double> out,
                   FlopCounter *counter = nullptr) {
  for (size_t i = 0; i < rows; ++i) {
    out[i] = Dot(m.data() + i * cols, v.data(), cols);
  }
  Count(counter, 2 * static_cast<int64_t>(rows) * static_cast<int64_t>(cols));
}

inline void Add(std::span<const double> a, std::span<const double> b,
                std::span<double> out, FlopCounter *counter = nullptr) {
  for (size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  Count(counter, static_cast<int64_t>(out.size()));
}

inline void Mul(std::span<const double> a, std::span<const double> b,
                std::span<double> out, FlopCounter *counter = nullptr) {
  for (size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  Count(counter, static_cast<int64_t>(out.size()));
}

inline double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline void Sigmoid(std::span<const double> a, std::span<double> out,
                    FlopCounter *counter = nullptr) {
  for (size_t i = 0; i < out.size(); ++i) out[i] = Sigmoid(a[i]);
  Count(counter, static_cast<int64_t>(out.size()));
}

inline void Tanh(std::span<const double> a, std::span<double> out,
                 FlopCounter *counter = nullptr) {
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a[i]);
  Count(counter, static_cast<int64_t>(out.size()));
}

// Max-subtracted softmax. Counted as 4 flops per element: subtract, exp,
// accumulate, divide.
inline void Softmax(std::span<const double> z, std::span<double> out,
                    FlopCounter *counter = nullptr) {
  double max = z[0];
  for (size_t i = 1; i < z.size(); ++i) max = z[i] > max ? z[i] : max;
  double sum = 0.0;
  for (size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - max);
    sum += out[i];
  }
  for (size_t i = 0; i < z.size(); ++i) out[i] /= sum;
  Count(counter, 4 * static_cast<int64_t>(z.size()));
}

// out = z - logsumexp(z).
inline void LogSoftmax(std::span<const double> z, std::span<double> out) {
  double max = z[0];
  for (size_t i = 1; i < z.size(); ++i) max = z[i] > max ? z[i] : max;
  double sum = 0.0;
  for (size_t i = 0; i < z.size(); ++i) sum += std::exp(z[i] - max);
  const double lse = max + std::log(sum);
  for (size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
}

}  // namespace kernels
}  // namespace skimrnn

#endif  // SKIMRNN_KERNELS_H_
