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

#ifndef SKIMRNN_DATA_H_
#define SKIMRNN_DATA_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "skimrnn/random.h"
#include "skimrnn/tensor.h"

namespace skimrnn {

// Lowercases ASCII letters and splits on Unicode whitespace. With
// split_punct, every ASCII punctuation character becomes its own token.
std::vector<std::string> Tokenize(std::string_view text,
                                  bool split_punct = false);

// Token <-> id map. Ids 0 and 1 are reserved for padding and unknown
// tokens; the rest follow first-seen order.
class Vocab {
 public:
  static constexpr int32_t kPad = 0;
  static constexpr int32_t kUnk = 1;
  static constexpr const char *kPadToken = "<pad>";
  static constexpr const char *kUnkToken = "<unk>";

  Vocab();

  int32_t Add(const std::string &token);
  // Unknown tokens map to kUnk.
  int32_t Id(const std::string &token) const;
  bool Contains(const std::string &token) const;
  const std::string &Token(int32_t id) const;
  size_t size() const { return tokens_.size(); }
  const std::vector<std::string> &tokens() const { return tokens_; }

  std::vector<int32_t> Encode(const std::vector<std::string> &tokens) const;

  static Vocab FromTokens(const std::vector<std::string> &tokens);

 private:
  std::unordered_map<std::string, int32_t> ids_;
  std::vector<std::string> tokens_;
};

// Dense label ids in first-seen order.
class LabelSet {
 public:
  int32_t Add(const std::string &label);
  // -1 when unseen.
  int32_t Id(const std::string &label) const;
  const std::string &Name(int32_t id) const { return names_.at(id); }
  size_t size() const { return names_.size(); }
  const std::vector<std::string> &names() const { return names_; }

  static LabelSet FromNames(const std::vector<std::string> &names);

 private:
  std::unordered_map<std::string, int32_t> ids_;
  std::vector<std::string> names_;
};

struct TextExample {
  std::string label;
  std::vector<std::string> tokens;
  friend bool operator==(const TextExample &, const TextExample &) = default;
};

struct LabeledExample {
  int32_t label = 0;
  std::vector<int32_t> ids;
};

struct SpanTextExample {
  std::vector<std::string> context;
  std::vector<std::string> question;
  int32_t start = 0;
  int32_t end = 0;
  friend bool operator==(const SpanTextExample &,
                         const SpanTextExample &) = default;
};

struct SpanExample {
  std::vector<int32_t> context;
  std::vector<int32_t> question;
  int32_t start = 0;
  int32_t end = 0;
};

// "<label>\t<text>" per line. Blank lines are ignored; a line without a tab
// or with empty text is a ParseError carrying its line number.
std::vector<TextExample> ParseClassification(std::istream &in,
                                             bool split_punct = false);
std::vector<TextExample> ParseClassificationFile(const std::string &path,
                                                 bool split_punct = false);
void WriteClassification(std::ostream &out,
                         const std::vector<TextExample> &examples);

// One JSON object per line: {"context": str, "question": str,
// "answer_start": int, "answer_end": int}; indices are token positions in
// the tokenized context, end inclusive.
std::vector<SpanTextExample> ParseSpans(std::istream &in);
std::vector<SpanTextExample> ParseSpanFile(const std::string &path);
void WriteSpans(std::ostream &out, const std::vector<SpanTextExample> &examples);

// Vocabulary over training tokens in first-seen order.
Vocab BuildVocab(const std::vector<TextExample> &examples);
Vocab BuildVocab(const std::vector<SpanTextExample> &examples);

// Labels are added to `labels` when add_labels is set; otherwise an unseen
// label is a ContractError.
std::vector<LabeledExample> Encode(const std::vector<TextExample> &examples,
                                   const Vocab &vocab, LabelSet &labels,
                                   bool add_labels);
std::vector<SpanExample> Encode(const std::vector<SpanTextExample> &examples,
                                const Vocab &vocab);

// Rows drawn from N(0, 0.1^2); the padding row is zero.
Tensor RandomEmbeddings(size_t vocab_size, size_t d_in, Rng &rng);

// Whitespace-separated "token v1 ... v_d" lines. In-vocabulary rows are
// copied, the rest are random as in RandomEmbeddings().
Tensor LoadEmbeddings(std::istream &in, const Vocab &vocab, size_t d_in,
                      Rng &rng);
Tensor LoadEmbeddings(const std::string &path, const Vocab &vocab,
                      size_t d_in, Rng &rng);

// Keyword classification task: each example has `length` tokens, all
// uniform fillers except one keyword at a uniform position. Keyword j has
// class j % num_classes. Filler tokens are "w<i>", keywords "key<j>".
struct KeywordTaskOptions {
  uint64_t seed = 1;
  size_t num_examples = 1000;
  size_t length = 40;
  size_t vocab_size = 100;  // keywords + fillers
  size_t num_keywords = 4;
  size_t num_classes = 2;
};
std::vector<TextExample> GenerateKeywordTask(const KeywordTaskOptions &opt);
std::string KeywordToken(size_t j);

// Span task: the question is one key token "q<k>". The context holds a
// marker "@" followed by the two answer tokens "a<k>x a<k>y" of that key,
// plus `num_distractors` marker + answer pairs of other keys. Remaining
// positions are fillers "f<i>".
struct SpanTaskOptions {
  uint64_t seed = 1;
  size_t num_examples = 1000;
  size_t context_length = 16;
  size_t vocab_size = 40;  // fillers
  size_t num_keys = 4;
  size_t num_distractors = 1;
};
std::vector<SpanTextExample> GenerateSpanTask(const SpanTaskOptions &opt);

// Rule-based solver for the span task: finds the answer pair of the
// question's key. Returns {-1, -1} when absent.
std::pair<int32_t, int32_t> SolveSpanByRule(const SpanTextExample &ex);

}  // namespace skimrnn

#endif  // SKIMRNN_DATA_H_
