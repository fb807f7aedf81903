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

#ifndef SKIMRNN_ERRORS_H_
#define SKIMRNN_ERRORS_H_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace skimrnn {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Index or range outside valid bounds.
class IndexError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of a function, e.g. log(0).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Violated precondition of an operation.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string &what, int64_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int64_t line() const { return line_; }

 private:
  int64_t line_;
};

// Invalid configuration value. field() names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(const std::string &field, const std::string &what)
      : Error(field + ": " + what), field_(field) {}
  const std::string &field() const { return field_; }

 private:
  std::string field_;
};

// Training diverged or received non-finite values.
class TrainingError : public Error {
 public:
  TrainingError(const std::string &what, int64_t step)
      : Error("step " + std::to_string(step) + ": " + what), step_(step) {}
  int64_t step() const { return step_; }

 private:
  int64_t step_;
};

// Benchmark could not produce a trustworthy measurement.
class BenchmarkError : public Error {
 public:
  using Error::Error;
};

}  // namespace skimrnn

#endif  // SKIMRNN_ERRORS_H_
