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

#include "persona/data.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include <unistd.h>

namespace persona {
namespace {

namespace fs = std::filesystem;
using testing::fixture_dir;

Tokens toks(std::initializer_list<const char*> words) { return Tokens(words.begin(), words.end()); }

TEST(Tokenize, LowercasesAndSplitsPunctuation) {
  EXPECT_EQ(tokenize("Hi, I'm  Bob!"), toks({"hi", ",", "i'm", "bob", "!"}));
  EXPECT_TRUE(tokenize("   ").empty());
  EXPECT_EQ(detokenize(toks({"a", "b"})), "a b");
}

TEST(ConvAI2, CumulativeContextsPerExchange) {
  const auto ex = load_convai2(fixture_dir() / "convai2/train_self_original.txt",
                               PersonaMode::kOriginal);
  ASSERT_EQ(ex.size(), 3u);
  EXPECT_EQ(ex[0].context.size(), 1u);
  EXPECT_EQ(ex[1].context.size(), 3u);
  EXPECT_EQ(ex[2].context.size(), 5u);
  EXPECT_EQ(ex[0].persona_a.size(), 4u);
  EXPECT_TRUE(ex[0].persona_b.empty());
  EXPECT_EQ(ex[2].context[1], ex[0].response);
  EXPECT_EQ(ex[0].persona_a[0], toks({"i", "like", "to", "ski", "."}));
  for (const auto& e : ex) EXPECT_NO_THROW(validate(e));
}

TEST(ConvAI2, BothPersonasAndCandidateColumns) {
  const auto ex = load_convai2(fixture_dir() / "convai2/valid_both_original.txt",
                               PersonaMode::kOriginal);
  ASSERT_EQ(ex.size(), 3u);
  EXPECT_EQ(ex[0].persona_a.size(), 2u);
  EXPECT_EQ(ex[0].persona_b.size(), 2u);
  EXPECT_EQ(ex[2].persona_b.size(), 1u);
  EXPECT_NE(ex[0].dialogue_id, ex[2].dialogue_id);
  EXPECT_EQ(ex[2].response.front(), "a");
  EXPECT_EQ(ex[2].response.back(), ".");
}

TEST(ConvAI2, EmptyFileGivesNoExamples) {
  EXPECT_TRUE(
      load_convai2(fixture_dir() / "convai2/empty_self_original.txt", PersonaMode::kOriginal)
          .empty());
}

TEST(ConvAI2, BrokenSequenceNamesTheLine) {
  try {
    load_convai2(fixture_dir() / "convai2/bad_sequence.txt", PersonaMode::kOriginal);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.location(), 3u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(ConvAI2, MissingPersonaBlockIsAnError) {
  EXPECT_THROW(load_convai2(fixture_dir() / "convai2/no_persona.txt", PersonaMode::kOriginal),
               ParseError);
}

TEST(ConvAI2, PersonaModeMustMatchFile) {
  EXPECT_THROW(load_convai2(fixture_dir() / "convai2/valid_both_original.txt",
                            PersonaMode::kRevised),
               std::invalid_argument);
}

TEST(ConvAI2, ParsingIsDeterministic) {
  const auto p = fixture_dir() / "convai2/valid_both_original.txt";
  EXPECT_EQ(load_convai2(p, PersonaMode::kOriginal), load_convai2(p, PersonaMode::kOriginal));
}

TEST(CmuDog, OneExamplePerTurn) {
  const auto ex = load_cmudog(fixture_dir() / "cmudog/inline/conversations.json");
  ASSERT_EQ(ex.size(), 8u);
  EXPECT_EQ(ex[0].context, std::vector<Tokens>{Tokens{std::string(kSilenceToken)}});
  EXPECT_EQ(ex[3].context.size(), 3u);
  EXPECT_EQ(ex[0].persona_a.size(), 4u);  // the four fields of section 0
  EXPECT_EQ(ex[2].persona_a.size(), 2u);  // two sentences of section 1
  EXPECT_EQ(ex[2].persona_a, ex[2].persona_b);
  EXPECT_EQ(ex[4].dialogue_id, 1);
  std::set<int> dialogues;
  for (const auto& e : ex) dialogues.insert(e.dialogue_id);
  EXPECT_EQ(dialogues.size(), 2u);
}

TEST(CmuDog, DirectoryLayoutWithWikiData) {
  const auto ex = load_cmudog(fixture_dir() / "cmudog/tree");
  ASSERT_EQ(ex.size(), 3u);
  ASSERT_EQ(ex[1].persona_a.size(), 2u);
  EXPECT_EQ(ex[1].persona_a[1], toks({"ripley", "survives", "."}));
}

TEST(CmuDog, SingleTurnConversation) {
  const auto ex = load_cmudog(fixture_dir() / "cmudog/one_turn.json");
  ASSERT_EQ(ex.size(), 1u);
  EXPECT_EQ(ex[0].context.size(), 1u);
  EXPECT_EQ(ex[0].response, toks({"hello", "?"}));
}

TEST(CmuDog, InvalidRecordReportsIndex) {
  try {
    load_cmudog(fixture_dir() / "cmudog/bad_record.json");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.location(), 1u);
  }
}

DialogueExample sentence_example(Tokens response) {
  DialogueExample ex;
  ex.persona_a = {toks({"x"})};
  ex.context = {toks({"y"})};
  ex.response = std::move(response);
  return ex;
}

TEST(Vocabulary, ReservedIdsAndUnknown) {
  Vocabulary v(std::vector<std::string>{"hello"});
  EXPECT_EQ(v.id("<pad>"), 0);
  EXPECT_EQ(v.id("<unk>"), 1);
  EXPECT_EQ(v.id("<sos>"), 2);
  EXPECT_EQ(v.id("<eos>"), 3);
  EXPECT_EQ(v.id("hello"), 4);
  EXPECT_EQ(v.id("never-seen"), Vocabulary::kUnk);
  EXPECT_THROW(Vocabulary(std::vector<std::string>{"a", "a"}), std::invalid_argument);
  EXPECT_THROW(Vocabulary(std::vector<std::string>{"<pad>"}), std::invalid_argument);
}

TEST(Vocabulary, FrequencyCutoff) {
  std::vector<DialogueExample> corpus;
  DialogueExample ex;
  ex.response = toks({"a", "a", "a", "b"});
  corpus.push_back(ex);
  const Vocabulary v = build_vocab(corpus, 2, 100);
  EXPECT_EQ(v.size(), Vocabulary::kReserved + 1);
  EXPECT_TRUE(v.contains("a"));
  EXPECT_FALSE(v.contains("b"));
}

TEST(Vocabulary, SizeCapKeepsMostFrequent) {
  DialogueExample ex;
  ex.response = toks({"c", "a", "b", "a"});
  const std::vector<DialogueExample> corpus = {ex};
  const Vocabulary v = build_vocab(corpus, 1, Vocabulary::kReserved + 1);
  EXPECT_EQ(v.size(), Vocabulary::kReserved + 1);
  EXPECT_TRUE(v.contains("a"));
  EXPECT_EQ(build_vocab({}, 1, 100).size(), Vocabulary::kReserved);
}

TEST(Vocabulary, RoundTripUpToUnknowns) {
  Vocabulary v(std::vector<std::string>{"i", "like", "ski"});
  const Tokens s = toks({"i", "like", "to", "ski"});
  EXPECT_EQ(v.decode(v.encode(s)), toks({"i", "like", "<unk>", "ski"}));
}

TEST(Batch, PaddingMaskAndFraming) {
  const Vocabulary v(std::vector<std::string>{"hi", "there", "x", "y"});
  DialogueExample ex = sentence_example(toks({"hi"}));
  ex.persona_a = {toks({"hi", "there"})};
  const std::vector<DialogueExample> batch_in = {ex};
  const Batch b = encode_batch(batch_in, v, {4, 10, 5});
  EXPECT_EQ(b.persona_a_ids.at(0, 0, 0), v.id("hi"));
  EXPECT_EQ(b.persona_a_ids.at(0, 0, 2), Vocabulary::kPad);
  const std::vector<std::uint8_t> mask = {b.persona_a_mask.at(0, 0, 0), b.persona_a_mask.at(0, 0, 1),
                                          b.persona_a_mask.at(0, 0, 2), b.persona_a_mask.at(0, 0, 3)};
  EXPECT_EQ(mask, (std::vector<std::uint8_t>{1, 1, 0, 0}));
  EXPECT_EQ(b.response_ids.at(0, 0), Vocabulary::kSos);
  EXPECT_EQ(b.response_ids.at(0, 1), v.id("hi"));
  EXPECT_EQ(b.response_ids.at(0, 2), Vocabulary::kEos);
  EXPECT_EQ(b.response_ids.at(0, 3), Vocabulary::kPad);
  EXPECT_EQ(b.example(0).response, (std::vector<int>{Vocabulary::kSos, v.id("hi"), Vocabulary::kEos}));
}

TEST(Batch, KeepsMostRecentTurnsAndMasksMatchLengths) {
  const Vocabulary v(std::vector<std::string>{"t0", "t1", "t2", "t3", "t4", "t5"});
  DialogueExample ex = sentence_example(toks({"t0"}));
  ex.context.clear();
  for (int i = 0; i < 6; ++i) ex.context.push_back({"t" + std::to_string(i)});
  const std::vector<DialogueExample> batch_in = {ex, sentence_example(toks({"t1", "t2"}))};
  const Batch b = encode_batch(batch_in, v, {3, 4, 5});
  EXPECT_EQ(b.context_counts[0], 4);
  EXPECT_EQ(b.context_ids.at(0, 0, 0), v.id("t2"));
  EXPECT_EQ(b.context_ids.at(0, 3, 0), v.id("t5"));
  for (int e = 0; e < b.size(); ++e) {
    for (int s = 0; s < 4; ++s) {
      int live = 0;
      for (int k = 0; k < 3; ++k) {
        live += b.context_mask.at(e, s, k);
        if (!b.context_mask.at(e, s, k)) EXPECT_EQ(b.context_ids.at(e, s, k), Vocabulary::kPad);
      }
      EXPECT_EQ(live, b.context_lengths.at(e, s));
    }
  }
}

TEST(Batch, LongSentencesAreTruncated) {
  const Vocabulary v(std::vector<std::string>{"w"});
  const std::vector<DialogueExample> batch_in = {sentence_example(Tokens(9, "w"))};
  const Batch b = encode_batch(batch_in, v, {4, 2, 2});
  EXPECT_EQ(b.response_lengths[0], 6);  // sos + 4 tokens + eos
}

class EmbeddingFile : public ::testing::Test {
 protected:
  void SetUp() override {
    path_ = fs::temp_directory_path() / ("persona_emb_" + std::to_string(::getpid()) + ".txt");
  }
  void TearDown() override { fs::remove(path_); }
  void write(const std::string& text) { std::ofstream(path_) << text; }
  fs::path path_;
};

TEST_F(EmbeddingFile, CopiesKnownRowsAndSeedsTheRest) {
  write("2 3\nhello 0.5 -0.25 1\n<pad> 9 9 9\n");
  const Vocabulary v(std::vector<std::string>{"hello", "world"});
  const Matrix m = load_pretrained_embeddings(path_, v, 3, 42);
  EXPECT_EQ(m.row(v.id("hello")), (Eigen::RowVector3d(0.5, -0.25, 1.0)));
  EXPECT_TRUE(m.row(Vocabulary::kPad).isZero(0.0));
  const auto w = m.row(v.id("world"));
  EXPECT_LE(w.cwiseAbs().maxCoeff(), 0.1);
  EXPECT_EQ(load_pretrained_embeddings(path_, v, 3, 42), m);
}

TEST_F(EmbeddingFile, DimensionMismatchNamesTheLine) {
  write("hello 0.5 -0.25 1\nworld 1 2\n");
  const Vocabulary v(std::vector<std::string>{"hello", "world"});
  try {
    load_pretrained_embeddings(path_, v, 3, 1);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.location(), 2u);
  }
}

}  // namespace
}  // namespace persona
