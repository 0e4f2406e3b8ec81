// Copyright 2026 The Persona Dialogue Authors
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

#include "persona/metrics.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

namespace persona {
namespace {

Tokens words_sentence(std::mt19937_64& rng, const std::vector<std::string>& words, int min_len,
                      int max_len) {
  Tokens out(std::uniform_int_distribution<int>(min_len, max_len)(rng));
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
  for (auto& w : out) w = words[pick(rng)];
  return out;
}

TEST(Bleu, HandCaseWithBrevityPenalty) {
  const std::vector<Tokens> hyp = {{"the", "cat"}};
  const std::vector<Tokens> ref = {{"the", "cat", "sat"}};
  const double expected = std::exp(1.0 - 3.0 / 2.0);
  EXPECT_NEAR(bleu_n(hyp, ref, 1), expected, 1e-15);
  EXPECT_NEAR(bleu_n(hyp, ref, 1), 0.60653, 1e-5);
  // Both bigram counts are 1 of 1, so BLEU-2 keeps the same penalty.
  EXPECT_NEAR(bleu_n(hyp, ref, 2), expected, 1e-15);
}

TEST(Bleu, IdentityCorpusScoresOne) {
  const std::vector<Tokens> c = {{"a", "b", "c"}, {"hello", "there"}};
  EXPECT_DOUBLE_EQ(bleu_n(c, c, 1), 1.0);
  EXPECT_DOUBLE_EQ(bleu_n(c, c, 2), 1.0);
}

TEST(Bleu, ClippedCountsAndEpsilon) {
  // Unigram "the" appears 4 times but is clipped to 2.
  const std::vector<Tokens> hyp = {{"the", "the", "the", "the"}};
  const std::vector<Tokens> ref = {{"the", "cat", "the", "mat"}};
  EXPECT_NEAR(bleu_n(hyp, ref, 1), 0.5, 1e-15);
  // No bigram matches: p2 falls back to epsilon.
  EXPECT_NEAR(bleu_n(hyp, ref, 2), std::sqrt(0.5 * kBleuEpsilon), 1e-15);
}

TEST(Bleu, Validation) {
  const std::vector<Tokens> one = {{"a"}};
  const std::vector<Tokens> two = {{"a"}, {"b"}};
  EXPECT_THROW(bleu_n(one, two, 1), std::invalid_argument);
  EXPECT_THROW(bleu_n(one, one, 0), std::invalid_argument);
}

TEST(Bleu, AgreesWithBruteForceOracle) {
  std::mt19937_64 rng(11);
  const std::vector<std::string> words = {"a", "b", "c", "d", "e"};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Tokens> hyps, refs;
    const int n = std::uniform_int_distribution<int>(1, 4)(rng);
    for (int i = 0; i < n; ++i) {
      hyps.push_back(words_sentence(rng, words, 0, 7));
      refs.push_back(words_sentence(rng, words, 1, 7));
    }
    for (int order : {1, 2}) {
      EXPECT_NEAR(bleu_n(hyps, refs, order),
                  testing::brute_force_bleu(hyps, refs, order, kBleuEpsilon), 1e-9)
          << "trial " << trial << " order " << order;
    }
  }
}

TEST(Bleu, InvariantToCorpusOrder) {
  std::mt19937_64 rng(12);
  const std::vector<std::string> words = {"x", "y", "z"};
  std::vector<Tokens> hyps, refs;
  for (int i = 0; i < 6; ++i) {
    hyps.push_back(words_sentence(rng, words, 1, 6));
    refs.push_back(words_sentence(rng, words, 1, 6));
  }
  const double before = bleu_n(hyps, refs, 2);
  std::reverse(hyps.begin(), hyps.end());
  std::reverse(refs.begin(), refs.end());
  EXPECT_NEAR(bleu_n(hyps, refs, 2), before, 1e-15);
}

TEST(Distinct, HandCases) {
  EXPECT_NEAR(distinct_n(std::vector<Tokens>{{"i", "am", "i"}}, 1), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(distinct_n(std::vector<Tokens>{{"a", "b", "a", "b"}}, 2), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(distinct_n(std::vector<Tokens>{{"a"}}, 2), 0.0);
  EXPECT_EQ(distinct_n(std::vector<Tokens>{}, 1), 0.0);
  // Pooled across the corpus, not averaged per response.
  EXPECT_NEAR(distinct_n(std::vector<Tokens>{{"a", "b"}, {"a", "b"}}, 1), 0.5, 1e-15);
}

TEST(Distinct, SeenNgramsNeverIncreaseIt) {
  std::mt19937_64 rng(13);
  const std::vector<std::string> words = {"p", "q", "r", "s"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Tokens> corpus;
    for (int i = 0; i < 3; ++i) corpus.push_back(words_sentence(rng, words, 2, 6));
    for (int n : {1, 2}) {
      const double before = distinct_n(corpus, n);
      auto extended = corpus;
      const Tokens& src = corpus[trial % corpus.size()];
      extended.push_back(Tokens(src.begin(), src.begin() + n));
      EXPECT_LE(distinct_n(extended, n), before + 1e-15);
    }
  }
}

TEST(Knowledge, SetCaseFromStopwordFilteredTokens) {
  const std::vector<Tokens> knowledge = {{"i", "have", "four", "children"},
                                         {"i", "am", "a", "gold", "medalist"}};
  const auto s = knowledge_rpf1({"I", "have", "four", "children", "doctor", "."}, knowledge);
  EXPECT_NEAR(s.recall, 0.5, 1e-15);
  EXPECT_NEAR(s.precision, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(s.f1, 4.0 / 7.0, 1e-15);
  EXPECT_NEAR(s.f1, 0.5714, 1e-4);
}

TEST(Knowledge, EmptySides) {
  const std::vector<Tokens> knowledge = {{"gold"}};
  const auto empty = knowledge_rpf1({"the", "a"}, knowledge);
  EXPECT_EQ(empty.precision, 0.0);
  EXPECT_EQ(empty.recall, 0.0);
  EXPECT_EQ(empty.f1, 0.0);
  EXPECT_EQ(harmonic_mean(0.0, 0.0), 0.0);
  EXPECT_NEAR(harmonic_mean(1.0, 0.5), 2.0 / 3.0, 1e-15);
}

TEST(Stopwords, BuiltinAndFile) {
  const auto& b = Stopwords::builtin();
  EXPECT_GT(b.size(), 50u);
  EXPECT_TRUE(b.ignores("the"));
  EXPECT_TRUE(b.ignores("?!"));
  EXPECT_FALSE(b.ignores("medalist"));

  const auto path = std::filesystem::temp_directory_path() / "persona_stopwords_test.txt";
  {
    std::ofstream out(path);
    out << "# comment\n\nfoo\nbar\n";
  }
  const auto s = Stopwords::load(path);
  EXPECT_EQ(s.size(), 2u);
  EXPECT_TRUE(s.ignores("foo"));
  EXPECT_FALSE(s.ignores("the"));
  std::filesystem::remove(path);
}

TEST(Report, CorpusFieldsAndSerialization) {
  const std::vector<Tokens> gold = {{"i", "love", "gold"}, {"four", "kids"}};
  const std::vector<std::vector<Tokens>> knowledge = {{{"gold", "medalist"}}, {{"four", "children"}}};
  const auto r = evaluate_corpus(gold, gold, knowledge);
  EXPECT_DOUBLE_EQ(r.bleu1, 1.0);
  EXPECT_DOUBLE_EQ(r.bleu2, 1.0);
  EXPECT_EQ(r.examples, 2u);
  // Per-example R = 1/2, 1/2 and P = 1/2, 1/2.
  EXPECT_NEAR(r.knowledge_recall, 0.5, 1e-15);
  EXPECT_NEAR(r.knowledge_precision, 0.5, 1e-15);
  EXPECT_NEAR(r.knowledge_f1, harmonic_mean(r.knowledge_precision, r.knowledge_recall), 1e-15);
  const std::string kv = r.to_key_value();
  EXPECT_NE(kv.find("bleu1=1.000000"), std::string::npos);
  EXPECT_NE(kv.find("knowledge_f1="), std::string::npos);
  EXPECT_NE(r.to_json().find("\"distinct2\""), std::string::npos);

  const std::vector<Tokens> short_out = {{"x"}};
  EXPECT_THROW(evaluate_corpus(short_out, gold, knowledge), std::invalid_argument);
}

}  // namespace
}  // namespace persona
