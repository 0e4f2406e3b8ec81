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

#include "stopwords_data.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace persona {

namespace {

using NGram = std::vector<std::string>;

std::map<NGram, long> count_ngrams(const Tokens& s, int n) {
  std::map<NGram, long> out;
  if (static_cast<int>(s.size()) < n) return out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) {
    ++out[NGram(s.begin() + static_cast<std::ptrdiff_t>(i),
                s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

}  // namespace

double bleu_n(std::span<const Tokens> hypotheses, std::span<const Tokens> references, int n) {
  if (hypotheses.empty()) throw std::invalid_argument("bleu_n: no hypotheses");
  if (hypotheses.size() != references.size()) {
    throw std::invalid_argument("bleu_n: hypothesis/reference count mismatch");
  }
  if (n < 1) throw std::invalid_argument("bleu_n: order must be >= 1");

  std::vector<long> matched(static_cast<std::size_t>(n), 0);
  std::vector<long> total(static_cast<std::size_t>(n), 0);
  long hyp_len = 0;
  long ref_len = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    hyp_len += static_cast<long>(hypotheses[i].size());
    ref_len += static_cast<long>(references[i].size());
    for (int order = 1; order <= n; ++order) {
      const auto hyp = count_ngrams(hypotheses[i], order);
      const auto ref = count_ngrams(references[i], order);
      for (const auto& [gram, c] : hyp) {
        auto it = ref.find(gram);
        matched[order - 1] += std::min(c, it == ref.end() ? 0L : it->second);
        total[order - 1] += c;
      }
    }
  }

  double log_sum = 0.0;
  for (int order = 0; order < n; ++order) {
    const double p = (matched[order] == 0 || total[order] == 0)
                         ? kBleuEpsilon
                         : static_cast<double>(matched[order]) / static_cast<double>(total[order]);
    log_sum += std::log(p);
  }
  double bp = 1.0;
  if (hyp_len == 0) {
    bp = 0.0;
  } else if (hyp_len < ref_len) {
    bp = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  }
  return bp * std::exp(log_sum / n);
}

double distinct_n(std::span<const Tokens> hypotheses, int n) {
  if (n < 1) throw std::invalid_argument("distinct_n: order must be >= 1");
  std::set<NGram> seen;
  long total = 0;
  for (const auto& h : hypotheses) {
    for (const auto& [gram, c] : count_ngrams(h, n)) {
      seen.insert(gram);
      total += c;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(seen.size()) / static_cast<double>(total);
}

const Stopwords& Stopwords::builtin() {
  static const Stopwords kBuiltin = [] {
    std::unordered_set<std::string> words;
    std::istringstream in(detail::kStopwordData);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      words.insert(line);
    }
    return Stopwords(std::move(words));
  }();
  return kBuiltin;
}

Stopwords Stopwords::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stopword list " + path.string());
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::string lower;
    for (char c : line) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    words.insert(std::move(lower));
  }
  return Stopwords(std::move(words));
}

bool Stopwords::ignores(std::string_view token) const {
  const bool punct_only = std::all_of(token.begin(), token.end(), [](char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
  });
  return punct_only || words_.count(std::string(token)) != 0;
}

double harmonic_mean(double a, double b) { return a + b == 0.0 ? 0.0 : 2.0 * a * b / (a + b); }

KnowledgeScores knowledge_rpf1(const Tokens& hypothesis, const std::vector<Tokens>& knowledge,
                               const Stopwords& stopwords) {
  if (knowledge.empty()) throw std::invalid_argument("knowledge_rpf1: empty knowledge");
  auto content = [&](const Tokens& s, std::set<std::string>& into) {
    for (const auto& t : s) {
      std::string lower;
      for (char c : t) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      if (!stopwords.ignores(lower)) into.insert(std::move(lower));
    }
  };
  std::set<std::string> known;
  for (const auto& s : knowledge) content(s, known);
  std::set<std::string> said;
  content(hypothesis, said);

  std::size_t overlap = 0;
  for (const auto& w : said) overlap += known.count(w);
  KnowledgeScores out;
  out.precision = said.empty() ? 0.0 : static_cast<double>(overlap) / static_cast<double>(said.size());
  out.recall = known.empty() ? 0.0 : static_cast<double>(overlap) / static_cast<double>(known.size());
  out.f1 = harmonic_mean(out.precision, out.recall);
  return out;
}

EvalReport evaluate_corpus(std::span<const Tokens> outputs, std::span<const Tokens> gold,
                           std::span<const std::vector<Tokens>> knowledge,
                           const Stopwords& stopwords) {
  if (outputs.size() != gold.size() || outputs.size() != knowledge.size()) {
    throw std::invalid_argument("evaluate_corpus: length mismatch");
  }
  if (outputs.empty()) throw std::invalid_argument("evaluate_corpus: empty corpus");
  EvalReport r;
  r.examples = outputs.size();
  r.bleu1 = bleu_n(outputs, gold, 1);
  r.bleu2 = bleu_n(outputs, gold, 2);
  r.distinct1 = distinct_n(outputs, 1);
  r.distinct2 = distinct_n(outputs, 2);
  double recall = 0.0;
  double precision = 0.0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const auto k = knowledge_rpf1(outputs[i], knowledge[i], stopwords);
    recall += k.recall;
    precision += k.precision;
  }
  r.knowledge_recall = recall / static_cast<double>(outputs.size());
  r.knowledge_precision = precision / static_cast<double>(outputs.size());
  r.knowledge_f1 = harmonic_mean(r.knowledge_precision, r.knowledge_recall);
  return r;
}

std::string EvalReport::to_key_value() const {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << "bleu1=" << bleu1 << '\n'
      << "bleu2=" << bleu2 << '\n'
      << "distinct1=" << distinct1 << '\n'
      << "distinct2=" << distinct2 << '\n'
      << "knowledge_recall=" << knowledge_recall << '\n'
      << "knowledge_precision=" << knowledge_precision << '\n'
      << "knowledge_f1=" << knowledge_f1 << '\n'
      << "examples=" << examples << '\n'
      << "bleu_smoothing=add-epsilon(" << std::scientific << kBleuEpsilon << ")\n";
  return out.str();
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["bleu1"] = bleu1;
  j["bleu2"] = bleu2;
  j["distinct1"] = distinct1;
  j["distinct2"] = distinct2;
  j["knowledge_recall"] = knowledge_recall;
  j["knowledge_precision"] = knowledge_precision;
  j["knowledge_f1"] = knowledge_f1;
  j["examples"] = examples;
  j["metadata"] = {{"bleu_smoothing", "add-epsilon"}, {"bleu_epsilon", kBleuEpsilon}};
  return j.dump(2);
}

void write_report(const EvalReport& report, const std::filesystem::path& key_value_path,
                  const std::filesystem::path& json_path) {
  std::ofstream kv(key_value_path);
  if (!kv) throw std::runtime_error("cannot write " + key_value_path.string());
  kv << report.to_key_value();
  std::ofstream js(json_path);
  if (!js) throw std::runtime_error("cannot write " + json_path.string());
  js << report.to_json() << '\n';
}

}  // namespace persona
