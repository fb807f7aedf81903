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

#include "skimrnn/data.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "skimrnn/errors.h"

namespace skimrnn {

namespace {

constexpr double kEmbeddingStddev = 0.1;

// Decodes one UTF-8 code point at text[i]; returns its byte length. Invalid
// sequences decode as a single byte.
size_t DecodeUtf8(std::string_view text, size_t i, char32_t *cp) {
  const unsigned char b0 = static_cast<unsigned char>(text[i]);
  size_t len = 1;
  char32_t value = b0;
  if (b0 >= 0xF0) {
    len = 4;
    value = b0 & 0x07;
  } else if (b0 >= 0xE0) {
    len = 3;
    value = b0 & 0x0F;
  } else if (b0 >= 0xC0) {
    len = 2;
    value = b0 & 0x1F;
  }
  if (len > 1) {
    if (i + len > text.size()) {
      *cp = b0;
      return 1;
    }
    for (size_t k = 1; k < len; ++k) {
      const unsigned char b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80) {
        *cp = b0;
        return 1;
      }
      value = (value << 6) | (b & 0x3F);
    }
  }
  *cp = value;
  return len;
}

bool IsUnicodeSpace(char32_t cp) {
  return (cp >= 0x09 && cp <= 0x0D) || cp == 0x20 || cp == 0x85 ||
         cp == 0xA0 || cp == 0x1680 || (cp >= 0x2000 && cp <= 0x200A) ||
         cp == 0x2028 || cp == 0x2029 || cp == 0x202F || cp == 0x205F ||
         cp == 0x3000;
}

std::ifstream OpenInput(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path, 0);
  return in;
}

std::string JoinTokens(const std::vector<std::string> &tokens) {
  std::string s;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) s += ' ';
    s += tokens[i];
  }
  return s;
}

}  // namespace

std::vector<std::string> Tokenize(std::string_view text, bool split_punct) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  size_t i = 0;
  while (i < text.size()) {
    char32_t cp;
    const size_t len = DecodeUtf8(text, i, &cp);
    if (IsUnicodeSpace(cp)) {
      flush();
    } else if (len == 1 && cp < 0x80) {
      const char ch = static_cast<char>(
          std::tolower(static_cast<unsigned char>(text[i])));
      if (split_punct && std::ispunct(static_cast<unsigned char>(ch))) {
        flush();
        tokens.emplace_back(1, ch);
      } else {
        current += ch;
      }
    } else {
      current.append(text.substr(i, len));
    }
    i += len;
  }
  flush();
  return tokens;
}

Vocab::Vocab() {
  Add(kPadToken);
  Add(kUnkToken);
}

int32_t Vocab::Add(const std::string &token) {
  auto it = ids_.find(token);
  if (it != ids_.end()) return it->second;
  const int32_t id = static_cast<int32_t>(tokens_.size());
  ids_.emplace(token, id);
  tokens_.push_back(token);
  return id;
}

int32_t Vocab::Id(const std::string &token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocab::Contains(const std::string &token) const {
  return ids_.count(token) > 0;
}

const std::string &Vocab::Token(int32_t id) const {
  if (id < 0 || static_cast<size_t>(id) >= tokens_.size()) {
    throw IndexError("vocab: id " + std::to_string(id) + " out of range");
  }
  return tokens_[id];
}

std::vector<int32_t> Vocab::Encode(const std::vector<std::string> &tokens) const {
  std::vector<int32_t> ids;
  ids.reserve(tokens.size());
  for (const std::string &t : tokens) ids.push_back(Id(t));
  return ids;
}

Vocab Vocab::FromTokens(const std::vector<std::string> &tokens) {
  if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kUnkToken) {
    throw ParseError("vocab: reserved entries missing", 0);
  }
  Vocab v;
  for (size_t i = 2; i < tokens.size(); ++i) v.Add(tokens[i]);
  if (v.size() != tokens.size()) throw ParseError("vocab: duplicate token", 0);
  return v;
}

int32_t LabelSet::Add(const std::string &label) {
  auto it = ids_.find(label);
  if (it != ids_.end()) return it->second;
  const int32_t id = static_cast<int32_t>(names_.size());
  ids_.emplace(label, id);
  names_.push_back(label);
  return id;
}

int32_t LabelSet::Id(const std::string &label) const {
  auto it = ids_.find(label);
  return it == ids_.end() ? -1 : it->second;
}

LabelSet LabelSet::FromNames(const std::vector<std::string> &names) {
  LabelSet s;
  for (const std::string &n : names) s.Add(n);
  return s;
}

std::vector<TextExample> ParseClassification(std::istream &in,
                                             bool split_punct) {
  std::vector<TextExample> out;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError("expected <label>\\t<text>, found no tab", line_no);
    }
    TextExample ex;
    ex.label = line.substr(0, tab);
    if (ex.label.empty()) throw ParseError("empty label", line_no);
    ex.tokens = Tokenize(std::string_view(line).substr(tab + 1), split_punct);
    if (ex.tokens.empty()) throw ParseError("empty text", line_no);
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<TextExample> ParseClassificationFile(const std::string &path,
                                                 bool split_punct) {
  std::ifstream in = OpenInput(path);
  return ParseClassification(in, split_punct);
}

void WriteClassification(std::ostream &out,
                         const std::vector<TextExample> &examples) {
  for (const TextExample &ex : examples) {
    out << ex.label << '\t' << JoinTokens(ex.tokens) << '\n';
  }
}

std::vector<SpanTextExample> ParseSpans(std::istream &in) {
  std::vector<SpanTextExample> out;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception &e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    SpanTextExample ex;
    try {
      ex.context = Tokenize(obj.at("context").get<std::string>());
      ex.question = Tokenize(obj.at("question").get<std::string>());
      ex.start = obj.at("answer_start").get<int32_t>();
      ex.end = obj.at("answer_end").get<int32_t>();
    } catch (const nlohmann::json::exception &e) {
      throw ParseError(std::string("bad field: ") + e.what(), line_no);
    }
    if (ex.context.empty()) throw ParseError("empty context", line_no);
    if (ex.question.empty()) throw ParseError("empty question", line_no);
    if (ex.start < 0 || ex.start > ex.end ||
        ex.end >= static_cast<int32_t>(ex.context.size())) {
      throw ParseError("answer span out of range", line_no);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<SpanTextExample> ParseSpanFile(const std::string &path) {
  std::ifstream in = OpenInput(path);
  return ParseSpans(in);
}

void WriteSpans(std::ostream &out, const std::vector<SpanTextExample> &examples) {
  for (const SpanTextExample &ex : examples) {
    nlohmann::ordered_json obj;
    obj["context"] = JoinTokens(ex.context);
    obj["question"] = JoinTokens(ex.question);
    obj["answer_start"] = ex.start;
    obj["answer_end"] = ex.end;
    out << obj.dump() << '\n';
  }
}

Vocab BuildVocab(const std::vector<TextExample> &examples) {
  Vocab v;
  for (const TextExample &ex : examples) {
    for (const std::string &t : ex.tokens) v.Add(t);
  }
  return v;
}

Vocab BuildVocab(const std::vector<SpanTextExample> &examples) {
  Vocab v;
  for (const SpanTextExample &ex : examples) {
    for (const std::string &t : ex.question) v.Add(t);
    for (const std::string &t : ex.context) v.Add(t);
  }
  return v;
}

std::vector<LabeledExample> Encode(const std::vector<TextExample> &examples,
                                   const Vocab &vocab, LabelSet &labels,
                                   bool add_labels) {
  std::vector<LabeledExample> out;
  out.reserve(examples.size());
  for (const TextExample &ex : examples) {
    int32_t label = add_labels ? labels.Add(ex.label) : labels.Id(ex.label);
    if (label < 0) throw ContractError("unknown label \"" + ex.label + "\"");
    out.push_back(LabeledExample{label, vocab.Encode(ex.tokens)});
  }
  return out;
}

std::vector<SpanExample> Encode(const std::vector<SpanTextExample> &examples,
                                const Vocab &vocab) {
  std::vector<SpanExample> out;
  out.reserve(examples.size());
  for (const SpanTextExample &ex : examples) {
    out.push_back(SpanExample{vocab.Encode(ex.context),
                              vocab.Encode(ex.question), ex.start, ex.end});
  }
  return out;
}

Tensor RandomEmbeddings(size_t vocab_size, size_t d_in, Rng &rng) {
  Tensor e(Shape{vocab_size, d_in});
  for (size_t r = 1; r < vocab_size; ++r) {
    for (size_t c = 0; c < d_in; ++c) e.at(r, c) = rng.Normal(0.0, kEmbeddingStddev);
  }
  return e;
}

Tensor LoadEmbeddings(std::istream &in, const Vocab &vocab, size_t d_in,
                      Rng &rng) {
  Tensor e(Shape{vocab.size(), d_in});
  std::vector<char> found(vocab.size(), 0);
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> values;
    std::string field;
    while (fields >> field) {
      try {
        size_t used = 0;
        values.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception &) {
        throw ParseError("invalid number \"" + field + "\"", line_no);
      }
    }
    if (values.size() != d_in) {
      throw ParseError("expected " + std::to_string(d_in) + " values, found " +
                           std::to_string(values.size()),
                       line_no);
    }
    if (!vocab.Contains(token)) continue;
    const int32_t id = vocab.Id(token);
    if (id == Vocab::kPad) continue;
    for (size_t c = 0; c < d_in; ++c) e.at(id, c) = values[c];
    found[id] = 1;
  }
  for (size_t r = 1; r < vocab.size(); ++r) {
    if (found[r]) continue;
    for (size_t c = 0; c < d_in; ++c) e.at(r, c) = rng.Normal(0.0, kEmbeddingStddev);
  }
  return e;
}

Tensor LoadEmbeddings(const std::string &path, const Vocab &vocab,
                      size_t d_in, Rng &rng) {
  std::ifstream in = OpenInput(path);
  return LoadEmbeddings(in, vocab, d_in, rng);
}

std::string KeywordToken(size_t j) { return "key" + std::to_string(j); }

std::vector<TextExample> GenerateKeywordTask(const KeywordTaskOptions &opt) {
  if (opt.num_keywords < 2) throw ContractError("keyword task: need >= 2 keywords");
  if (opt.length < 4) throw ContractError("keyword task: length must be >= 4");
  if (opt.vocab_size <= opt.num_keywords) {
    throw ContractError("keyword task: vocab_size " +
                        std::to_string(opt.vocab_size) +
                        " must exceed num_keywords " +
                        std::to_string(opt.num_keywords));
  }
  if (opt.num_classes < 2 || opt.num_classes > opt.num_keywords) {
    throw ContractError("keyword task: num_classes must be in [2, num_keywords]");
  }
  const size_t num_fillers = opt.vocab_size - opt.num_keywords;
  Rng rng(opt.seed);
  std::vector<TextExample> out;
  out.reserve(opt.num_examples);
  for (size_t n = 0; n < opt.num_examples; ++n) {
    TextExample ex;
    const size_t keyword = rng.Index(opt.num_keywords);
    const size_t position = rng.Index(opt.length);
    for (size_t t = 0; t < opt.length; ++t) {
      if (t == position) {
        ex.tokens.push_back(KeywordToken(keyword));
      } else {
        ex.tokens.push_back("w" + std::to_string(rng.Index(num_fillers)));
      }
    }
    ex.label = std::to_string(keyword % opt.num_classes);
    out.push_back(std::move(ex));
  }
  return out;
}

namespace {

std::string SpanKey(size_t k) { return "q" + std::to_string(k); }
std::string AnswerFirst(size_t k) { return "a" + std::to_string(k) + "x"; }
std::string AnswerSecond(size_t k) { return "a" + std::to_string(k) + "y"; }
constexpr const char *kMarker = "@";

}  // namespace

std::vector<SpanTextExample> GenerateSpanTask(const SpanTaskOptions &opt) {
  if (opt.context_length < 8) throw ContractError("span task: context_length must be >= 8");
  if (opt.num_keys < 2) throw ContractError("span task: need >= 2 keys");
  if (opt.num_distractors >= opt.num_keys) {
    throw ContractError("span task: num_distractors must be < num_keys");
  }
  if (3 * (opt.num_distractors + 1) > opt.context_length) {
    throw ContractError("span task: context too short for answers");
  }
  if (opt.vocab_size < 1) throw ContractError("span task: vocab_size must be >= 1");
  Rng rng(opt.seed);
  std::vector<SpanTextExample> out;
  out.reserve(opt.num_examples);
  const size_t blocks = opt.num_distractors + 1;
  for (size_t n = 0; n < opt.num_examples; ++n) {
    SpanTextExample ex;
    const size_t key = rng.Index(opt.num_keys);
    ex.question = {SpanKey(key)};

    // Keys of the answer blocks: the true key first, then distinct others.
    std::vector<size_t> keys = {key};
    while (keys.size() < blocks) {
      const size_t k = rng.Index(opt.num_keys);
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    }
    // Place blocks of 3 tokens without overlap: choose the free filler count
    // before each block.
    const size_t free_slots = opt.context_length - 3 * blocks;
    std::vector<size_t> gaps(blocks + 1, 0);
    for (size_t s = 0; s < free_slots; ++s) ++gaps[rng.Index(blocks + 1)];
    std::vector<size_t> order(blocks);
    for (size_t b = 0; b < blocks; ++b) order[b] = b;
    for (size_t b = blocks; b > 1; --b) std::swap(order[b - 1], order[rng.Index(b)]);

    for (size_t b = 0; b <= blocks; ++b) {
      for (size_t g = 0; g < gaps[b]; ++g) {
        ex.context.push_back("f" + std::to_string(rng.Index(opt.vocab_size)));
      }
      if (b == blocks) break;
      const size_t k = keys[order[b]];
      if (order[b] == 0) {
        ex.start = static_cast<int32_t>(ex.context.size()) + 1;
        ex.end = ex.start + 1;
      }
      ex.context.push_back(kMarker);
      ex.context.push_back(AnswerFirst(k));
      ex.context.push_back(AnswerSecond(k));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::pair<int32_t, int32_t> SolveSpanByRule(const SpanTextExample &ex) {
  if (ex.question.empty() || ex.question[0].size() < 2) return {-1, -1};
  const std::string k = ex.question[0].substr(1);
  for (size_t t = 1; t + 1 < ex.context.size(); ++t) {
    if (ex.context[t - 1] == kMarker && ex.context[t] == "a" + k + "x" &&
        ex.context[t + 1] == "a" + k + "y") {
      return {static_cast<int32_t>(t), static_cast<int32_t>(t + 1)};
    }
  }
  return {-1, -1};
}

}  // namespace skimrnn
