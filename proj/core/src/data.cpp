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

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>

namespace persona {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool is_word_byte(unsigned char c) {
  return std::isalnum(c) || c == '_' || c == '\'' || c >= 0x80;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

Tokens tokenize_or_silence(std::string_view text) {
  Tokens t = tokenize(text);
  if (t.empty()) t.emplace_back(kSilenceToken);
  return t;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (is_word_byte(c)) {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
      out.emplace_back(1, ch);
    }
  }
  flush();
  return out;
}

std::string detokenize(const Tokens& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

void validate(const DialogueExample& ex) {
  if (ex.context.empty()) throw std::invalid_argument("example has empty context");
  if (ex.response.empty()) throw std::invalid_argument("example has empty response");
  auto check = [](const std::vector<Tokens>& block, const char* what) {
    for (const auto& s : block) {
      if (s.empty()) throw std::invalid_argument(std::string("empty sentence in ") + what);
    }
  };
  check(ex.persona_a, "persona_a");
  check(ex.persona_b, "persona_b");
  check(ex.context, "context");
}

PersonaMode parse_persona_mode(std::string_view s) {
  if (s == "original") return PersonaMode::kOriginal;
  if (s == "revised") return PersonaMode::kRevised;
  throw std::invalid_argument("unknown persona mode: " + std::string(s));
}

std::string_view to_string(PersonaMode m) {
  return m == PersonaMode::kOriginal ? "original" : "revised";
}

// ---------------------------------------------------------------- ConvAI2

std::vector<DialogueExample> load_convai2(const fs::path& path, PersonaMode mode) {
  const std::string name = path.filename().string();
  const bool says_original = name.find("original") != std::string::npos;
  const bool says_revised = name.find("revised") != std::string::npos;
  if ((mode == PersonaMode::kOriginal && says_revised) ||
      (mode == PersonaMode::kRevised && says_original)) {
    throw std::invalid_argument("persona mode " + std::string(to_string(mode)) +
                                " does not match file " + name);
  }

  std::ifstream in = open_input(path);
  std::vector<DialogueExample> out;

  struct Pending {
    std::vector<Tokens> persona_a, persona_b;
    std::vector<std::pair<Tokens, Tokens>> exchanges;
    std::size_t first_line = 0;
  } cur;
  int dialogue = -1;
  int expected = 1;

  auto flush = [&] {
    if (dialogue < 0) return;
    if (cur.persona_a.empty()) {
      throw ParseError("dialogue starting at line " + std::to_string(cur.first_line) +
                           " has no persona block",
                       cur.first_line);
    }
    std::vector<Tokens> history;
    for (auto& [query, reply] : cur.exchanges) {
      history.push_back(query);
      DialogueExample ex;
      ex.persona_a = cur.persona_a;
      ex.persona_b = cur.persona_b;
      ex.context = history;
      ex.response = reply;
      ex.dialogue_id = dialogue;
      out.push_back(std::move(ex));
      history.push_back(std::move(reply));
    }
    cur = Pending{};
  };

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view view = line;
    if (trim(view).empty()) continue;

    std::size_t digits = 0;
    while (digits < view.size() && std::isdigit(static_cast<unsigned char>(view[digits]))) ++digits;
    int n = 0;
    if (digits == 0 || digits >= view.size() || view[digits] != ' ' ||
        std::from_chars(view.data(), view.data() + digits, n).ec != std::errc{}) {
      throw ParseError("line " + std::to_string(lineno) + ": missing turn number", lineno);
    }
    std::string_view rest = view.substr(digits + 1);

    if (n == 1) {
      flush();
      ++dialogue;
      cur.first_line = lineno;
      expected = 1;
    } else if (dialogue < 0 || n != expected) {
      throw ParseError("line " + std::to_string(lineno) + ": turn number " + std::to_string(n) +
                           " out of sequence (expected " + std::to_string(expected) + ")",
                       lineno);
    }
    expected = n + 1;

    constexpr std::string_view kSelf = "your persona:";
    constexpr std::string_view kPartner = "partner's persona:";
    if (starts_with(rest, kSelf) || starts_with(rest, kPartner)) {
      if (!cur.exchanges.empty()) {
        throw ParseError("line " + std::to_string(lineno) + ": persona line after dialogue turns",
                         lineno);
      }
      const bool self = starts_with(rest, kSelf);
      Tokens sent = tokenize(rest.substr(self ? kSelf.size() : kPartner.size()));
      if (sent.empty()) {
        throw ParseError("line " + std::to_string(lineno) + ": empty persona sentence", lineno);
      }
      (self ? cur.persona_a : cur.persona_b).push_back(std::move(sent));
      continue;
    }

    auto fields = split(rest, '\t');
    if (fields.size() < 2) {
      throw ParseError("line " + std::to_string(lineno) + ": exchange without a reply", lineno);
    }
    Tokens reply = tokenize(fields[1]);
    if (reply.empty()) {
      throw ParseError("line " + std::to_string(lineno) + ": empty reply", lineno);
    }
    cur.exchanges.emplace_back(tokenize_or_silence(fields[0]), std::move(reply));
  }
  flush();
  return out;
}

// ----------------------------------------------------------------- CMUDoG

namespace {

std::vector<Tokens> split_sentences(std::string_view text) {
  std::vector<Tokens> out;
  Tokens cur;
  for (auto& tok : tokenize(text)) {
    const bool stop = tok == "." || tok == "!" || tok == "?";
    cur.push_back(std::move(tok));
    if (stop) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string flatten_value(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string joined;
    for (const auto& item : v) {
      if (!joined.empty()) joined += ", ";
      joined += flatten_value(item);
    }
    return joined;
  }
  return v.dump();
}

/// Knowledge sentences for every section of a grounding document.
std::map<std::string, std::vector<Tokens>> document_sections(const json& doc) {
  std::map<std::string, std::vector<Tokens>> out;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    std::vector<Tokens> sents;
    if (it->is_object()) {
      for (auto f = it->begin(); f != it->end(); ++f) {
        Tokens s = tokenize(f.key());
        s.emplace_back(":");
        for (auto& t : tokenize(flatten_value(*f))) s.push_back(std::move(t));
        sents.push_back(std::move(s));
      }
    } else {
      sents = split_sentences(flatten_value(*it));
    }
    out[it.key()] = std::move(sents);
  }
  return out;
}

std::optional<fs::path> find_wiki_dir(const fs::path& start) {
  fs::path dir = start;
  for (int depth = 0; depth < 4 && !dir.empty(); ++depth) {
    if (fs::is_directory(dir / "WikiData")) return dir / "WikiData";
    if (dir == dir.parent_path()) break;
    dir = dir.parent_path();
  }
  return std::nullopt;
}

struct RawRecord {
  json record;
  fs::path origin;
};

void append_conversation(const RawRecord& raw, std::size_t index, int dialogue_id,
                         std::vector<DialogueExample>& out) {
  const json& rec = raw.record;
  auto fail = [&](const std::string& why) -> ParseError {
    return ParseError("record " + std::to_string(index) + ": " + why, index);
  };
  if (!rec.is_object()) throw fail("not an object");
  if (!rec.contains("history") || !rec["history"].is_array()) throw fail("missing history list");

  json document;
  if (rec.contains("document")) {
    document = rec["document"];
  } else if (rec.contains("wikiDocumentIdx")) {
    auto wiki = find_wiki_dir(raw.origin.parent_path());
    if (!wiki) throw fail("wikiDocumentIdx given but no WikiData directory found");
    const fs::path doc_path = *wiki / (std::to_string(rec["wikiDocumentIdx"].get<int>()) + ".json");
    std::ifstream din(doc_path);
    if (!din) throw fail("cannot open " + doc_path.string());
    try {
      din >> document;
    } catch (const json::exception& e) {
      throw fail(std::string("bad document: ") + e.what());
    }
  } else {
    throw fail("missing document");
  }
  if (!document.is_object() || document.empty()) throw fail("document must be a non-empty object");
  const auto sections = document_sections(document);

  std::vector<Tokens> all_sections;
  for (const auto& [key, sents] : sections) {
    all_sections.insert(all_sections.end(), sents.begin(), sents.end());
  }

  std::vector<Tokens> history;
  for (const auto& turn : rec["history"]) {
    if (!turn.is_object() || !turn.contains("text") || !turn["text"].is_string()) {
      throw fail("turn without text");
    }
    std::vector<Tokens> knowledge = all_sections;
    if (turn.contains("docIdx")) {
      const std::string key = turn["docIdx"].is_string() ? turn["docIdx"].get<std::string>()
                                                         : turn["docIdx"].dump();
      auto it = sections.find(key);
      if (it != sections.end() && !it->second.empty()) knowledge = it->second;
    }
    DialogueExample ex;
    ex.persona_a = knowledge;
    ex.persona_b = knowledge;
    ex.context = history.empty() ? std::vector<Tokens>{Tokens{std::string(kSilenceToken)}} : history;
    ex.response = tokenize_or_silence(turn["text"].get<std::string>());
    ex.dialogue_id = dialogue_id;
    history.push_back(ex.response);
    out.push_back(std::move(ex));
  }
}

std::vector<RawRecord> read_records(const fs::path& file) {
  std::ifstream in = open_input(file);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::vector<RawRecord> out;
  if (trim(text).empty()) return out;
  try {
    json doc = json::parse(text);
    if (doc.is_array()) {
      for (auto& r : doc) out.push_back({std::move(r), file});
    } else {
      out.push_back({std::move(doc), file});
    }
    return out;
  } catch (const json::parse_error&) {
    // fall through: one record per line
  }
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (trim(line).empty()) continue;
    try {
      out.push_back({json::parse(line), file});
    } catch (const json::parse_error& e) {
      throw ParseError("record " + std::to_string(out.size()) + ": " + e.what(), out.size());
    }
  }
  return out;
}

}  // namespace

std::vector<DialogueExample> load_cmudog(const fs::path& path) {
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    const fs::path root = fs::is_directory(path / "Conversations") ? path / "Conversations" : path;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
      if (entry.path().parent_path().filename() == "WikiData") continue;
      files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }

  std::vector<DialogueExample> out;
  std::size_t index = 0;
  for (const auto& f : files) {
    for (const auto& raw : read_records(f)) {
      append_conversation(raw, index, static_cast<int>(index), out);
      ++index;
    }
  }
  return out;
}

// ------------------------------------------------------------- Vocabulary

namespace {
const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> kTokens = {"<pad>", "<unk>", "<sos>", "<eos>"};
  return kTokens;
}
}  // namespace

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
  id_to_token_ = reserved_tokens();
  id_to_token_.insert(id_to_token_.end(), tokens.begin(), tokens.end());
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    if (!token_to_id_.emplace(id_to_token_[i], static_cast<int>(i)).second) {
      throw std::invalid_argument("duplicate vocabulary token: " + id_to_token_[i]);
    }
  }
}

int Vocabulary::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("token id out of range");
  return id_to_token_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const {
  return token_to_id_.count(std::string(token)) != 0;
}

std::vector<int> Vocabulary::encode(const Tokens& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

Tokens Vocabulary::decode(std::span<const int> ids) const {
  Tokens out;
  for (int i : ids) {
    if (i == kPad || i == kSos || i == kEos) continue;
    out.push_back(token(i));
  }
  return out;
}

Vocabulary build_vocab(std::span<const DialogueExample> examples, int min_freq,
                       std::size_t max_size) {
  if (min_freq < 1) throw std::invalid_argument("min_freq must be >= 1");
  std::unordered_map<std::string, long> counts;
  auto add = [&](const Tokens& s) {
    for (const auto& t : s) ++counts[t];
  };
  for (const auto& ex : examples) {
    for (const auto& s : ex.persona_a) add(s);
    for (const auto& s : ex.persona_b) add(s);
    for (const auto& s : ex.context) add(s);
    add(ex.response);
  }
  std::vector<std::pair<std::string, long>> ranked;
  for (auto& [tok, n] : counts) {
    if (n < min_freq) continue;
    if (std::find(reserved_tokens().begin(), reserved_tokens().end(), tok) !=
        reserved_tokens().end()) {
      continue;
    }
    ranked.emplace_back(tok, n);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  const std::size_t room =
      max_size > static_cast<std::size_t>(Vocabulary::kReserved) ? max_size - Vocabulary::kReserved : 0;
  if (ranked.size() > room) ranked.resize(room);
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [tok, n] : ranked) tokens.push_back(tok);
  return Vocabulary(tokens);
}

// ------------------------------------------------------------------ Batch

namespace {

void fill_block(const std::vector<Tokens>& sentences, const Vocabulary& vocab, int b, int k_max,
                Array3<int>& ids, Array3<std::uint8_t>& mask, Array2<int>& lengths,
                std::vector<int>& counts) {
  const int slots = static_cast<int>(sentences.size());
  for (int s = 0; s < slots; ++s) {
    const auto& sent = sentences[static_cast<std::size_t>(s)];
    const int len = std::min(static_cast<int>(sent.size()), k_max);
    for (int k = 0; k < len; ++k) {
      ids.at(b, s, k) = vocab.id(sent[static_cast<std::size_t>(k)]);
      mask.at(b, s, k) = 1;
    }
    lengths.at(b, s) = len;
  }
  counts[static_cast<std::size_t>(b)] = slots;
}

std::vector<std::vector<int>> extract(const Array3<int>& ids, const Array2<int>& lengths,
                                      int count, int b) {
  std::vector<std::vector<int>> out;
  for (int s = 0; s < count; ++s) {
    std::vector<int> sent;
    for (int k = 0; k < lengths.at(b, s); ++k) sent.push_back(ids.at(b, s, k));
    out.push_back(std::move(sent));
  }
  return out;
}

}  // namespace

Batch encode_batch(std::span<const DialogueExample> examples, const Vocabulary& vocab,
                   const BatchCaps& caps) {
  if (caps.k_max < 1 || caps.l_c_max < 1 || caps.l_p_max < 1) {
    throw std::invalid_argument("batch caps must be >= 1");
  }
  const int n = static_cast<int>(examples.size());
  const int k = caps.k_max;
  Batch batch;
  auto init = [&](Array3<int>& ids, Array3<std::uint8_t>& mask, Array2<int>& len,
                  std::vector<int>& counts, int slots) {
    ids = Array3<int>(n, slots, k, Vocabulary::kPad);
    mask = Array3<std::uint8_t>(n, slots, k, 0);
    len = Array2<int>(n, slots, 0);
    counts.assign(static_cast<std::size_t>(n), 0);
  };
  init(batch.persona_a_ids, batch.persona_a_mask, batch.persona_a_lengths, batch.persona_a_counts,
       caps.l_p_max);
  init(batch.persona_b_ids, batch.persona_b_mask, batch.persona_b_lengths, batch.persona_b_counts,
       caps.l_p_max);
  init(batch.context_ids, batch.context_mask, batch.context_lengths, batch.context_counts,
       caps.l_c_max);
  batch.response_ids = Array2<int>(n, k + 2, Vocabulary::kPad);
  batch.response_mask = Array2<std::uint8_t>(n, k + 2, 0);
  batch.response_lengths.assign(static_cast<std::size_t>(n), 0);

  for (int b = 0; b < n; ++b) {
    const auto& ex = examples[static_cast<std::size_t>(b)];
    auto head = [](const std::vector<Tokens>& s, int cap) {
      return std::vector<Tokens>(s.begin(), s.begin() + std::min<std::ptrdiff_t>(s.size(), cap));
    };
    const std::ptrdiff_t keep = std::min<std::ptrdiff_t>(ex.context.size(), caps.l_c_max);
    std::vector<Tokens> recent(ex.context.end() - keep, ex.context.end());
    fill_block(head(ex.persona_a, caps.l_p_max), vocab, b, k, batch.persona_a_ids,
               batch.persona_a_mask, batch.persona_a_lengths, batch.persona_a_counts);
    fill_block(head(ex.persona_b, caps.l_p_max), vocab, b, k, batch.persona_b_ids,
               batch.persona_b_mask, batch.persona_b_lengths, batch.persona_b_counts);
    fill_block(recent, vocab, b, k, batch.context_ids, batch.context_mask, batch.context_lengths,
               batch.context_counts);

    int pos = 0;
    auto put = [&](int id) {
      batch.response_ids.at(b, pos) = id;
      batch.response_mask.at(b, pos) = 1;
      ++pos;
    };
    put(Vocabulary::kSos);
    const int len = std::min(static_cast<int>(ex.response.size()), k);
    for (int i = 0; i < len; ++i) put(vocab.id(ex.response[static_cast<std::size_t>(i)]));
    put(Vocabulary::kEos);
    batch.response_lengths[static_cast<std::size_t>(b)] = pos;
  }
  return batch;
}

ExampleIds Batch::example(int b) const {
  ExampleIds out;
  out.persona_a = extract(persona_a_ids, persona_a_lengths, persona_a_counts[b], b);
  out.persona_b = extract(persona_b_ids, persona_b_lengths, persona_b_counts[b], b);
  out.context = extract(context_ids, context_lengths, context_counts[b], b);
  for (int i = 0; i < response_lengths[b]; ++i) out.response.push_back(response_ids.at(b, i));
  return out;
}

// ------------------------------------------------------------- Embeddings

Matrix load_pretrained_embeddings(const fs::path& path, const Vocabulary& vocab, int dim,
                                  std::uint64_t seed) {
  if (dim < 1) throw std::invalid_argument("embedding dim must be >= 1");
  Matrix table(vocab.size(), dim);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  for (Eigen::Index i = 0; i < table.size(); ++i) table(i) = 0.0;
  for (int r = 0; r < vocab.size(); ++r) {
    for (int c = 0; c < dim; ++c) table(r, c) = dist(rng);
  }

  std::ifstream in = open_input(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> values;
    std::string cell;
    while (fields >> cell) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw ParseError("line " + std::to_string(lineno) + ": bad number '" + cell + "'", lineno);
      }
      values.push_back(v);
    }
    // word2vec-style "count dim" header
    if (lineno == 1 && values.size() == 1 && std::all_of(token.begin(), token.end(), ::isdigit)) {
      continue;
    }
    if (values.size() != static_cast<std::size_t>(dim)) {
      throw ParseError("line " + std::to_string(lineno) + ": expected " + std::to_string(dim) +
                           " values, got " + std::to_string(values.size()),
                       lineno);
    }
    if (!vocab.contains(token)) continue;
    const int row = vocab.id(token);
    for (int c = 0; c < dim; ++c) table(row, c) = values[static_cast<std::size_t>(c)];
  }
  table.row(Vocabulary::kPad).setZero();
  return table;
}

}  // namespace persona
