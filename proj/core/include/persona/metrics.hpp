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

#pragma once

#include "persona/data.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace persona {

/// Floor used for an n-gram precision with zero matches.
inline constexpr double kBleuEpsilon = 1e-9;

/// Corpus BLEU with uniform weights over orders 1..n and the standard
/// brevity penalty (one reference per hypothesis).
double bleu_n(std::span<const Tokens> hypotheses, std::span<const Tokens> references, int n);

/// Distinct n-grams over total n-grams, pooled across the corpus.
double distinct_n(std::span<const Tokens> hypotheses, int n);

class Stopwords {
 public:
  /// The list bundled with the library (data/stopwords.txt).
  static const Stopwords& builtin();
  /// One token per line; blank lines and lines starting with '#' are skipped.
  static Stopwords load(const std::filesystem::path& path);

  explicit Stopwords(std::unordered_set<std::string> words) : words_(std::move(words)) {}

  /// True for listed words and for tokens made only of punctuation.
  bool ignores(std::string_view token) const;
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

struct KnowledgeScores {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
};

double harmonic_mean(double a, double b);

/// Set overlap between the content words of a response and of its knowledge.
KnowledgeScores knowledge_rpf1(const Tokens& hypothesis, const std::vector<Tokens>& knowledge,
                               const Stopwords& stopwords = Stopwords::builtin());

struct EvalReport {
  double bleu1 = 0.0;
  double bleu2 = 0.0;
  double distinct1 = 0.0;
  double distinct2 = 0.0;
  double knowledge_recall = 0.0;
  double knowledge_precision = 0.0;
  double knowledge_f1 = 0.0;
  std::size_t examples = 0;

  /// key=value lines, one metric per line, fixed order.
  std::string to_key_value() const;
  std::string to_json() const;
};

/// Knowledge R/P are averaged over examples; F1 is their harmonic mean.
EvalReport evaluate_corpus(std::span<const Tokens> outputs, std::span<const Tokens> gold,
                           std::span<const std::vector<Tokens>> knowledge,
                           const Stopwords& stopwords = Stopwords::builtin());

void write_report(const EvalReport& report, const std::filesystem::path& key_value_path,
                  const std::filesystem::path& json_path);

}  // namespace persona
