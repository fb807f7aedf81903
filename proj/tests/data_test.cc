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

#include <map>
#include <sstream>

#include "boost/math/distributions/chi_squared.hpp"
#include "gtest/gtest.h"
#include "skimrnn/errors.h"

namespace skimrnn {
namespace {

using Tokens = std::vector<std::string>;

TEST(TokenizeTest, Examples) {
  EXPECT_EQ(Tokenize("Good movie ."), (Tokens{"good", "movie", "."}));
  EXPECT_EQ(Tokenize(""), Tokens{});
  EXPECT_EQ(Tokenize("A  b"), (Tokens{"a", "b"}));
  EXPECT_EQ(Tokenize("  \t lead\ntrail \r\n"), (Tokens{"lead", "trail"}));
}

TEST(TokenizeTest, UnicodeWhitespaceAndPunctuation) {
  // No-break space and ideographic space separate tokens.
  EXPECT_EQ(Tokenize("caf\xC3\xA9\xC2\xA0ok\xE3\x80\x80x"),
            (Tokens{"caf\xC3\xA9", "ok", "x"}));
  EXPECT_EQ(Tokenize("Hello, world!"), (Tokens{"hello,", "world!"}));
  EXPECT_EQ(Tokenize("Hello, world!", true),
            (Tokens{"hello", ",", "world", "!"}));
}

TEST(VocabTest, ReservedIdsAndFirstSeenOrder) {
  std::vector<TextExample> ex = {{"1", {"b", "a", "b"}}, {"0", {"c", "a"}}};
  Vocab v = BuildVocab(ex);
  EXPECT_EQ(v.Id(Vocab::kPadToken), Vocab::kPad);
  EXPECT_EQ(v.Id(Vocab::kUnkToken), Vocab::kUnk);
  EXPECT_EQ(v.Id("b"), 2);
  EXPECT_EQ(v.Id("a"), 3);
  EXPECT_EQ(v.Id("c"), 4);
  EXPECT_EQ(v.Id("zzz"), Vocab::kUnk);
  EXPECT_EQ(Vocab::FromTokens(v.tokens()).tokens(), v.tokens());
  EXPECT_EQ(BuildVocab(ex).tokens(), v.tokens());
}

TEST(ParseClassificationTest, Examples) {
  std::istringstream in("1\tgood movie\n");
  auto ex = ParseClassification(in);
  ASSERT_EQ(ex.size(), 1u);
  EXPECT_EQ(ex[0].label, "1");
  EXPECT_EQ(ex[0].tokens, (Tokens{"good", "movie"}));

  std::istringstream two("pos\tfine\nneg\tbad\npos\tnice\n");
  LabelSet labels;
  Encode(ParseClassification(two), Vocab(), labels, true);
  EXPECT_EQ(labels.size(), 2u);
  EXPECT_EQ(labels.Id("pos"), 0);
  EXPECT_EQ(labels.Id("neg"), 1);
}

TEST(ParseClassificationTest, ReportsOffendingLine) {
  std::istringstream in("1\tok\n\nno_tab_here\n");
  try {
    ParseClassification(in);
    FAIL();
  } catch (const ParseError &e) {
    EXPECT_EQ(e.line(), 3);
  }
  std::istringstream empty_text("1\tok\n0\t   \n");
  try {
    ParseClassification(empty_text);
    FAIL();
  } catch (const ParseError &e) {
    EXPECT_EQ(e.line(), 2);
  }
}

TEST(EmbeddingsTest, LoadCopiesKnownRowsAndSamplesOthers) {
  Vocab v;
  v.Add("the");
  v.Add("cat");
  std::istringstream in("the 0.1 0.2\nunused 5 5\n");
  Rng rng(3);
  Tensor e = LoadEmbeddings(in, v, 2, rng);
  EXPECT_EQ(e.at(2, 0), 0.1);
  EXPECT_EQ(e.at(2, 1), 0.2);
  EXPECT_EQ(e.at(0, 0), 0.0);
  EXPECT_EQ(e.at(0, 1), 0.0);
  EXPECT_NE(e.at(3, 0), 0.0);

  std::istringstream again("the 0.1 0.2\nunused 5 5\n");
  Rng rng2(3);
  EXPECT_EQ(LoadEmbeddings(again, v, 2, rng2), e);
}

TEST(EmbeddingsTest, DimensionMismatchReportsLine) {
  Vocab v;
  std::istringstream in("a 1 2\nb 1 2 3\n");
  Rng rng(1);
  try {
    LoadEmbeddings(in, v, 2, rng);
    FAIL();
  } catch (const ParseError &e) {
    EXPECT_EQ(e.line(), 2);
  }
}

TEST(KeywordTaskTest, DeterministicAndWellFormed) {
  KeywordTaskOptions opt;
  opt.num_examples = 200;
  opt.length = 12;
  auto a = GenerateKeywordTask(opt);
  auto b = GenerateKeywordTask(opt);
  EXPECT_EQ(a, b);
  std::ostringstream sa, sb;
  WriteClassification(sa, a);
  WriteClassification(sb, b);
  EXPECT_EQ(sa.str(), sb.str());

  for (const TextExample &ex : a) {
    ASSERT_EQ(ex.tokens.size(), 12u);
    int keywords = 0;
    std::string label;
    for (const std::string &t : ex.tokens) {
      if (t.rfind("key", 0) == 0) {
        ++keywords;
        // Label is a deterministic function of the keyword.
        label = std::to_string(std::stoul(t.substr(3)) % opt.num_classes);
      }
    }
    EXPECT_EQ(keywords, 1);
    EXPECT_EQ(label, ex.label);
  }
}

TEST(KeywordTaskTest, Errors) {
  KeywordTaskOptions opt;
  opt.vocab_size = 4;
  opt.num_keywords = 4;
  EXPECT_THROW(GenerateKeywordTask(opt), ContractError);
  opt.vocab_size = 10;
  opt.length = 3;
  EXPECT_THROW(GenerateKeywordTask(opt), ContractError);
}

TEST(KeywordTaskTest, KeywordPositionsAreUniform) {
  KeywordTaskOptions opt;
  opt.num_examples = 10000;
  opt.length = 20;
  std::vector<double> counts(opt.length, 0.0);
  for (const TextExample &ex : GenerateKeywordTask(opt)) {
    for (size_t t = 0; t < ex.tokens.size(); ++t) {
      if (ex.tokens[t].rfind("key", 0) == 0) counts[t] += 1;
    }
  }
  const double expected = opt.num_examples / static_cast<double>(opt.length);
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  boost::math::chi_squared dist(static_cast<double>(opt.length - 1));
  EXPECT_GT(boost::math::cdf(boost::math::complement(dist, chi2)), 0.001);
}

TEST(ClassificationFileTest, GeneratedDatasetRoundTrips) {
  KeywordTaskOptions opt;
  opt.num_examples = 50;
  auto examples = GenerateKeywordTask(opt);
  std::stringstream buf;
  WriteClassification(buf, examples);
  auto parsed = ParseClassification(buf);
  EXPECT_EQ(parsed, examples);
  Vocab v = BuildVocab(examples);
  LabelSet l1, l2;
  auto a = Encode(examples, v, l1, true);
  auto b = Encode(parsed, v, l2, true);
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].ids, b[i].ids);
    EXPECT_EQ(a[i].label, b[i].label);
  }
}

TEST(SpanTaskTest, WellFormedDeterministicAndRuleSolvable) {
  SpanTaskOptions opt;
  opt.num_examples = 100;
  auto a = GenerateSpanTask(opt);
  EXPECT_EQ(a, GenerateSpanTask(opt));
  int exact = 0;
  for (const SpanTextExample &ex : a) {
    EXPECT_EQ(ex.start + 1, ex.end);
    EXPECT_EQ(ex.context.size(), opt.context_length);
    EXPECT_EQ(ex.context[ex.start - 1], "@");
    auto [s, e] = SolveSpanByRule(ex);
    exact += (s == ex.start && e == ex.end);
  }
  EXPECT_EQ(exact, 100);

  std::stringstream buf;
  WriteSpans(buf, a);
  EXPECT_EQ(ParseSpans(buf), a);
}

TEST(SpanTaskTest, Errors) {
  SpanTaskOptions opt;
  opt.context_length = 7;
  EXPECT_THROW(GenerateSpanTask(opt), ContractError);
  std::istringstream bad(
      "{\"context\": \"a b\", \"question\": \"q\", \"answer_start\": 1, "
      "\"answer_end\": 2}\n");
  try {
    ParseSpans(bad);
    FAIL();
  } catch (const ParseError &e) {
    EXPECT_EQ(e.line(), 1);
  }
}

}  // namespace
}  // namespace skimrnn
