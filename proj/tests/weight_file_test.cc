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

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

#include "gtest/gtest.h"
#include "skimrnn/errors.h"

namespace skimrnn {
namespace {

Vocab MakeVocab(size_t n) {
  Vocab v;
  for (size_t i = v.size(); i < n; ++i) v.Add("t" + std::to_string(i));
  return v;
}

TEST(WeightFileTest, HeaderLayout) {
  WeightFile f;
  f.header.d_in = 3;
  f.header.d = 0x01020304;
  f.header.d_small = 2;
  const std::string bytes = f.Serialize();
  ASSERT_EQ(bytes.size(), 8u + 5 * 4 + 4 + 4 + 4);
  EXPECT_EQ(std::memcmp(bytes.data(), "SKIMRNN\0", 8), 0);
  EXPECT_EQ(bytes[8], 1);   // version, little-endian
  EXPECT_EQ(bytes[12], 3);  // d_in
  EXPECT_EQ(bytes[16], 4);  // d low byte first
  EXPECT_EQ(bytes[19], 1);
  EXPECT_EQ(bytes[24], 2);  // k
  EXPECT_EQ(bytes.substr(28, 4), "ifog");
}

TEST(WeightFileTest, ArrayEncoding) {
  WeightFile f;
  f.AddArray("x", Tensor::Vector({1.0}));
  const std::string bytes = f.Serialize();
  // ... u32 count, u32 len, "x", u32 rank, u64 dim, f64 value, u32 lists.
  const size_t base = 32;
  EXPECT_EQ(bytes[base], 1);
  EXPECT_EQ(bytes[base + 4], 1);
  EXPECT_EQ(bytes[base + 8], 'x');
  EXPECT_EQ(bytes[base + 9], 1);
  EXPECT_EQ(bytes[base + 13], 1);
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<uint64_t>(static_cast<unsigned char>(bytes[base + 21 + i]))
            << (8 * i);
  }
  EXPECT_EQ(bits, 0x3ff0000000000000ULL);
}

TEST(WeightFileTest, RoundTripIsBitExact) {
  Rng rng(1);
  WeightFile f;
  f.header.d_in = 4;
  f.header.d = 5;
  f.header.d_small = 1;
  Tensor odd(Shape{2, 3});
  const double specials[] = {0.0, -0.0, std::numeric_limits<double>::denorm_min(),
                             std::numeric_limits<double>::max(), -1.0 / 3.0,
                             std::nextafter(1.0, 2.0)};
  for (size_t i = 0; i < 6; ++i) odd[i] = specials[i];
  f.AddArray("odd", odd);
  Tensor random(Shape{7});
  for (double &v : random.data()) v = rng.Normal(0.0, 1e3);
  f.AddArray("random", random);
  f.AddArray("empty", Tensor(Shape{0, 4}));
  f.AddArray("scalar", Tensor::Scalar(2.5));
  f.AddList("names", {"a", "", "ü"});
  const std::string bytes = f.Serialize();
  WeightFile g = WeightFile::Deserialize(bytes);
  EXPECT_TRUE(f == g);
  EXPECT_EQ(g.Serialize(), bytes);
  EXPECT_TRUE(std::signbit(g.Array("odd")[1]));
}

TEST(WeightFileTest, RejectsCorruptInput) {
  WeightFile f;
  f.AddArray("x", Tensor::Vector({1.0, 2.0}));
  std::string bytes = f.Serialize();
  EXPECT_THROW(WeightFile::Deserialize(bytes.substr(0, bytes.size() - 3)),
               ParseError);
  EXPECT_THROW(WeightFile::Deserialize(bytes + "x"), ParseError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(WeightFile::Deserialize(bad_magic), ParseError);
  std::string bad_version = bytes;
  bad_version[8] = 9;
  EXPECT_THROW(WeightFile::Deserialize(bad_version), ParseError);
  std::string bad_gates = bytes;
  bad_gates[28] = 'g';
  EXPECT_THROW(WeightFile::Deserialize(bad_gates), ParseError);
  EXPECT_THROW(f.Array("missing"), ParseError);
  EXPECT_THROW(f.AddArray("x", Tensor::Vector({0.0})), ContractError);
}

TEST(WeightFileTest, UnitRoundTrip) {
  Rng rng(2);
  SkimUnitParams p = SkimUnitParams::Zeros(3, 6, 2);
  p.Initialize(rng);
  WeightFile f;
  AddUnit(f, "", p);
  ASSERT_TRUE(f.HasArray("big.W"));
  ASSERT_TRUE(f.HasArray("decision.b"));
  SkimUnitParams q = ReadUnit(WeightFile::Deserialize(f.Serialize()), "", 3, 6, 2);
  EXPECT_EQ(p.big.w, q.big.w);
  EXPECT_EQ(p.small.b, q.small.b);
  EXPECT_EQ(p.decision_w, q.decision_w);
  EXPECT_THROW(ReadUnit(f, "", 3, 7, 2), ParseError);
}

TEST(WeightFileTest, ClassifierRoundTrip) {
  Rng rng(3);
  Vocab vocab = MakeVocab(12);
  LabelSet labels = LabelSet::FromNames({"neg", "pos", "meh"});
  ClassifierModel m = ClassifierModel::Create(RnnKind::kSkim, 12, 4, 6, 2, 3, rng);
  WeightFile f = ToWeightFile(m, vocab, labels);
  ModelBundle b = FromWeightFile(WeightFile::Deserialize(f.Serialize()));
  ASSERT_EQ(b.task, "classifier");
  ASSERT_TRUE(b.classifier.has_value());
  EXPECT_EQ(b.vocab.tokens(), vocab.tokens());
  EXPECT_EQ(b.labels.names(), labels.names());
  ClassifierModel &r = *b.classifier;
  EXPECT_EQ(r.kind, RnnKind::kSkim);
  auto a = m.Tensors(), c = r.Tensors();
  for (size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i].second, *c[i].second);
  const std::vector<int32_t> ids = {2, 5, 7, 11};
  EXPECT_EQ(m.Classify(ids).probs, r.Classify(ids).probs);
  EXPECT_EQ(ToWeightFile(r, b.vocab, b.labels).Serialize(), f.Serialize());
}

TEST(WeightFileTest, QaRoundTripThroughDisk) {
  Rng rng(4);
  Vocab vocab = MakeVocab(9);
  QaAttentionModel m = QaAttentionModel::Create(RnnKind::kLstm, 9, 3, 4, 1, rng);
  const auto path = std::filesystem::temp_directory_path() / "skimrnn_qa_test.bin";
  ToWeightFile(m, vocab).Save(path.string());
  ModelBundle b = FromWeightFile(WeightFile::Load(path.string()));
  std::filesystem::remove(path);
  ASSERT_TRUE(b.qa.has_value());
  EXPECT_EQ(b.qa->kind, RnnKind::kLstm);
  const std::vector<int32_t> ctx = {2, 3, 4, 5}, q = {6};
  EXPECT_EQ(m.Attend(ctx, q).start_probs, b.qa->Attend(ctx, q).start_probs);
  EXPECT_THROW(WeightFile::Load("/nonexistent/dir/w.bin"), Error);
}

}  // namespace
}  // namespace skimrnn
