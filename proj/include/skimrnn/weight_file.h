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

#ifndef SKIMRNN_WEIGHT_FILE_H_
#define SKIMRNN_WEIGHT_FILE_H_

// Binary weight container. All integers and floats are little-endian.
//
//   magic        8 bytes  "SKIMRNN\0"
//   version      u32      currently 1
//   d_in, d, d_small, k   u32 each
//   gate order   4 bytes  "ifog"
//   array count  u32
//   per array:   u32 name length, name bytes, u32 rank, u64 dims[rank],
//                f64 values[prod(dims)]
//   list count   u32
//   per list:    u32 name length, name bytes, u32 item count,
//                per item: u32 length, bytes
//
// Arrays and lists keep insertion order, so equal contents serialize to
// equal bytes.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "skimrnn/data.h"
#include "skimrnn/models.h"
#include "skimrnn/skim_cell.h"
#include "skimrnn/tensor.h"

namespace skimrnn {

inline constexpr uint32_t kWeightFileVersion = 1;
inline constexpr char kGateOrder[] = "ifog";

struct WeightFileHeader {
  uint32_t version = kWeightFileVersion;
  uint32_t d_in = 0;
  uint32_t d = 0;
  uint32_t d_small = 0;
  uint32_t k = kNumChoices;
  std::string gate_order = kGateOrder;

  friend bool operator==(const WeightFileHeader &,
                         const WeightFileHeader &) = default;
};

class WeightFile {
 public:
  WeightFileHeader header;

  // Throws ContractError on a duplicate name.
  void AddArray(const std::string &name, const Tensor &t);
  void AddList(const std::string &name, std::vector<std::string> items);

  bool HasArray(const std::string &name) const;
  bool HasList(const std::string &name) const;
  // Throw ParseError when the entry is missing.
  const Tensor &Array(const std::string &name) const;
  const std::vector<std::string> &List(const std::string &name) const;
  // First item of a list.
  const std::string &Value(const std::string &name) const;

  const std::vector<std::pair<std::string, Tensor>> &arrays() const {
    return arrays_;
  }
  const std::vector<std::pair<std::string, std::vector<std::string>>> &lists()
      const {
    return lists_;
  }

  std::string Serialize() const;
  // Throws ParseError on a bad magic, unsupported version, unknown gate
  // order or truncated data.
  static WeightFile Deserialize(std::string_view bytes);

  // Throws Error when the file cannot be written or read.
  void Save(const std::string &path) const;
  static WeightFile Load(const std::string &path);

  friend bool operator==(const WeightFile &, const WeightFile &) = default;

 private:
  std::vector<std::pair<std::string, Tensor>> arrays_;
  std::vector<std::pair<std::string, std::vector<std::string>>> lists_;
};

// One skim unit: big.W, big.b, small.W, small.b, decision.W, decision.b
// under the given prefix.
void AddUnit(WeightFile &file, const std::string &prefix,
             const SkimUnitParams &params);
SkimUnitParams ReadUnit(const WeightFile &file, const std::string &prefix,
                        size_t d_in, size_t d, size_t d_small);

// A model plus what is needed to run it on raw text.
struct ModelBundle {
  // "classifier" or "qa".
  std::string task;
  std::optional<ClassifierModel> classifier;
  std::optional<QaAttentionModel> qa;
  Vocab vocab;
  LabelSet labels;  // classifier only
};

WeightFile ToWeightFile(ClassifierModel &model, const Vocab &vocab,
                        const LabelSet &labels);
WeightFile ToWeightFile(QaAttentionModel &model, const Vocab &vocab);
// Throws ParseError when arrays are missing or have the wrong shapes.
ModelBundle FromWeightFile(const WeightFile &file);

}  // namespace skimrnn

#endif  // SKIMRNN_WEIGHT_FILE_H_
