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

#include "skimrnn/weight_file.h"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "skimrnn/errors.h"

namespace skimrnn {

namespace {

constexpr char kMagic[8] = {'S', 'K', 'I', 'M', 'R', 'N', 'N', '\0'};

class Writer {
 public:
  void Bytes(const void *p, size_t n) {
    out_.append(static_cast<const char *>(p), n);
  }
  template <typename T>
  void Uint(T v) {
    for (size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
  }
  void F64(double v) { Uint(std::bit_cast<uint64_t>(v)); }
  void String(const std::string &s) {
    Uint(static_cast<uint32_t>(s.size()));
    Bytes(s.data(), s.size());
  }
  std::string Take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::string_view Bytes(size_t n) {
    if (in_.size() - pos_ < n) {
      throw ParseError("weight file truncated at byte " + std::to_string(pos_), 0);
    }
    std::string_view out = in_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  template <typename T>
  T Uint() {
    std::string_view b = Bytes(sizeof(T));
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(b[i])) << (8 * i);
    }
    return v;
  }
  double F64() { return std::bit_cast<double>(Uint<uint64_t>()); }
  std::string String() {
    const uint32_t n = Uint<uint32_t>();
    return std::string(Bytes(n));
  }
  bool done() const { return pos_ == in_.size(); }
  size_t remaining() const { return in_.size() - pos_; }

 private:
  std::string_view in_;
  size_t pos_ = 0;
};

void CopyInto(const WeightFile &file, const std::string &name, Tensor &dst) {
  const Tensor &src = file.Array(name);
  if (src.shape() != dst.shape()) {
    throw ParseError("array '" + name + "' has shape " + src.ShapeString() +
                         ", expected " + dst.ShapeString(),
                     0);
  }
  std::copy(src.data().begin(), src.data().end(), dst.data().begin());
}

size_t Rows(const WeightFile &file, const std::string &name) {
  const Tensor &t = file.Array(name);
  if (t.rank() != 2) throw ParseError("array '" + name + "' is not a matrix", 0);
  return t.rows();
}

}  // namespace

void WeightFile::AddArray(const std::string &name, const Tensor &t) {
  if (HasArray(name)) throw ContractError("duplicate array '" + name + "'");
  arrays_.emplace_back(name, t);
}

void WeightFile::AddList(const std::string &name,
                         std::vector<std::string> items) {
  if (HasList(name)) throw ContractError("duplicate list '" + name + "'");
  lists_.emplace_back(name, std::move(items));
}

bool WeightFile::HasArray(const std::string &name) const {
  return std::any_of(arrays_.begin(), arrays_.end(),
                     [&](const auto &a) { return a.first == name; });
}

bool WeightFile::HasList(const std::string &name) const {
  return std::any_of(lists_.begin(), lists_.end(),
                     [&](const auto &l) { return l.first == name; });
}

const Tensor &WeightFile::Array(const std::string &name) const {
  for (const auto &a : arrays_) {
    if (a.first == name) return a.second;
  }
  throw ParseError("weight file has no array '" + name + "'", 0);
}

const std::vector<std::string> &WeightFile::List(const std::string &name) const {
  for (const auto &l : lists_) {
    if (l.first == name) return l.second;
  }
  throw ParseError("weight file has no list '" + name + "'", 0);
}

const std::string &WeightFile::Value(const std::string &name) const {
  const auto &items = List(name);
  if (items.empty()) throw ParseError("weight file list '" + name + "' is empty", 0);
  return items.front();
}

std::string WeightFile::Serialize() const {
  Writer w;
  w.Bytes(kMagic, sizeof(kMagic));
  w.Uint(header.version);
  w.Uint(header.d_in);
  w.Uint(header.d);
  w.Uint(header.d_small);
  w.Uint(header.k);
  if (header.gate_order.size() != 4) {
    throw ContractError("gate order must have 4 characters");
  }
  w.Bytes(header.gate_order.data(), 4);
  w.Uint(static_cast<uint32_t>(arrays_.size()));
  for (const auto &[name, t] : arrays_) {
    w.String(name);
    w.Uint(static_cast<uint32_t>(t.rank()));
    for (size_t dim : t.shape()) w.Uint(static_cast<uint64_t>(dim));
    for (double v : t.data()) w.F64(v);
  }
  w.Uint(static_cast<uint32_t>(lists_.size()));
  for (const auto &[name, items] : lists_) {
    w.String(name);
    w.Uint(static_cast<uint32_t>(items.size()));
    for (const std::string &s : items) w.String(s);
  }
  return w.Take();
}

WeightFile WeightFile::Deserialize(std::string_view bytes) {
  Reader r(bytes);
  if (std::memcmp(r.Bytes(sizeof(kMagic)).data(), kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("not a weight file (bad magic)", 0);
  }
  WeightFile file;
  file.header.version = r.Uint<uint32_t>();
  if (file.header.version != kWeightFileVersion) {
    throw ParseError("unsupported weight file version " +
                         std::to_string(file.header.version),
                     0);
  }
  file.header.d_in = r.Uint<uint32_t>();
  file.header.d = r.Uint<uint32_t>();
  file.header.d_small = r.Uint<uint32_t>();
  file.header.k = r.Uint<uint32_t>();
  file.header.gate_order = std::string(r.Bytes(4));
  if (file.header.gate_order != kGateOrder) {
    throw ParseError("unsupported gate order '" + file.header.gate_order + "'", 0);
  }
  const uint32_t n_arrays = r.Uint<uint32_t>();
  for (uint32_t i = 0; i < n_arrays; ++i) {
    std::string name = r.String();
    const uint32_t rank = r.Uint<uint32_t>();
    if (rank > 2) throw ParseError("array '" + name + "' has rank > 2", 0);
    Shape shape(rank);
    for (size_t &dim : shape) dim = static_cast<size_t>(r.Uint<uint64_t>());
    const size_t count = ShapeSize(shape);
    if (count > r.remaining() / sizeof(double)) {
      throw ParseError("array '" + name + "' exceeds the file size", 0);
    }
    std::vector<double> data(count);
    for (double &v : data) v = r.F64();
    if (file.HasArray(name)) throw ParseError("duplicate array '" + name + "'", 0);
    file.AddArray(name, Tensor(std::move(shape), std::move(data)));
  }
  const uint32_t n_lists = r.Uint<uint32_t>();
  for (uint32_t i = 0; i < n_lists; ++i) {
    std::string name = r.String();
    const uint32_t n = r.Uint<uint32_t>();
    std::vector<std::string> items;
    for (uint32_t j = 0; j < n; ++j) items.push_back(r.String());
    if (file.HasList(name)) throw ParseError("duplicate list '" + name + "'", 0);
    file.AddList(name, std::move(items));
  }
  if (!r.done()) throw ParseError("trailing bytes after weight file", 0);
  return file;
}

void WeightFile::Save(const std::string &path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  const std::string bytes = Serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing '" + path + "'");
}

WeightFile WeightFile::Load(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open weight file '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return Deserialize(bytes);
}

void AddUnit(WeightFile &file, const std::string &prefix,
             const SkimUnitParams &params) {
  file.AddArray(prefix + "big.W", params.big.w);
  file.AddArray(prefix + "big.b", params.big.b);
  file.AddArray(prefix + "small.W", params.small.w);
  file.AddArray(prefix + "small.b", params.small.b);
  file.AddArray(prefix + "decision.W", params.decision_w);
  file.AddArray(prefix + "decision.b", params.decision_b);
}

SkimUnitParams ReadUnit(const WeightFile &file, const std::string &prefix,
                        size_t d_in, size_t d, size_t d_small) {
  SkimUnitParams p = SkimUnitParams::Zeros(d_in, d, d_small);
  CopyInto(file, prefix + "big.W", p.big.w);
  CopyInto(file, prefix + "big.b", p.big.b);
  CopyInto(file, prefix + "small.W", p.small.w);
  CopyInto(file, prefix + "small.b", p.small.b);
  CopyInto(file, prefix + "decision.W", p.decision_w);
  CopyInto(file, prefix + "decision.b", p.decision_b);
  return p;
}

namespace {

WeightFile BaseFile(const std::string &task, RnnKind kind, size_t d_in,
                    size_t d, size_t d_small, bool freeze,
                    std::vector<NamedTensor> tensors, const Vocab &vocab) {
  WeightFile file;
  file.header.d_in = static_cast<uint32_t>(d_in);
  file.header.d = static_cast<uint32_t>(d);
  file.header.d_small = static_cast<uint32_t>(d_small);
  for (const NamedTensor &t : tensors) file.AddArray(t.first, *t.second);
  file.AddList("task", {task});
  file.AddList("rnn", {RnnKindName(kind)});
  file.AddList("freeze_embeddings", {freeze ? "1" : "0"});
  file.AddList("vocab", vocab.tokens());
  return file;
}

}  // namespace

WeightFile ToWeightFile(ClassifierModel &model, const Vocab &vocab,
                        const LabelSet &labels) {
  if (vocab.size() != model.vocab_size) {
    throw ContractError("vocabulary size does not match the model");
  }
  WeightFile file =
      BaseFile("classifier", model.kind, model.d_in, model.d, model.d_small,
               model.freeze_embeddings, model.Tensors(), vocab);
  file.AddList("labels", labels.names());
  return file;
}

WeightFile ToWeightFile(QaAttentionModel &model, const Vocab &vocab) {
  if (vocab.size() != model.vocab_size) {
    throw ContractError("vocabulary size does not match the model");
  }
  return BaseFile("qa", model.kind, model.d_in, model.d, model.d_small,
                  model.freeze_embeddings, model.Tensors(), vocab);
}

ModelBundle FromWeightFile(const WeightFile &file) {
  ModelBundle bundle;
  bundle.task = file.Value("task");
  RnnKind kind;
  try {
    kind = ParseRnnKind(file.Value("rnn"));
  } catch (const ContractError &e) {
    throw ParseError(e.what(), 0);
  }
  const bool freeze = file.Value("freeze_embeddings") == "1";
  bundle.vocab = Vocab::FromTokens(file.List("vocab"));
  const size_t d_in = file.header.d_in, d = file.header.d;
  const size_t ds = file.header.d_small;
  if (ds >= d) throw ParseError("header has d_small >= d", 0);
  const size_t vocab_size = Rows(file, "embedding");

  if (bundle.task == "classifier") {
    bundle.labels = LabelSet::FromNames(file.List("labels"));
    ClassifierModel m = ClassifierModel::Zeros(kind, vocab_size, d_in, d, ds,
                                               Rows(file, "output.W"));
    m.freeze_embeddings = freeze;
    for (NamedTensor &t : m.Tensors()) CopyInto(file, t.first, *t.second);
    if (bundle.labels.size() != m.num_classes) {
      throw ParseError("label list does not match output.W", 0);
    }
    bundle.classifier = std::move(m);
  } else if (bundle.task == "qa") {
    QaAttentionModel m = QaAttentionModel::Zeros(kind, vocab_size, d_in, d, ds);
    m.freeze_embeddings = freeze;
    for (NamedTensor &t : m.Tensors()) CopyInto(file, t.first, *t.second);
    bundle.qa = std::move(m);
  } else {
    throw ParseError("unknown task '" + bundle.task + "' in weight file", 0);
  }
  if (bundle.vocab.size() != vocab_size) {
    throw ParseError("vocabulary does not match the embedding table", 0);
  }
  return bundle;
}

}  // namespace skimrnn
