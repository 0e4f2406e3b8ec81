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

#include "persona/autograd.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace persona {

using Tokens = std::vector<std::string>;

/// Raised for malformed corpus or embedding files. `location` is the 1-based
/// line number (or record index for structured corpora), 0 when unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t location)
      : std::runtime_error(what), location_(location) {}
  std::size_t location() const { return location_; }

 private:
  std::size_t location_;
};

/// Lowercases and splits on whitespace; every character outside
/// [a-z0-9_'] (and non-ASCII bytes) that is not a space becomes its own token.
Tokens tokenize(std::string_view text);
std::string detokenize(const Tokens& tokens);

/// One training instance: speaker A's knowledge, speaker B's knowledge,
/// the dialogue context (last turn is the query) and the gold response.
struct DialogueExample {
  std::vector<Tokens> persona_a;
  std::vector<Tokens> persona_b;
  std::vector<Tokens> context;
  Tokens response;
  int dialogue_id = 0;

  bool operator==(const DialogueExample&) const = default;
};

/// Throws std::invalid_argument if an example breaks the record invariants
/// (non-empty context and response, no empty sentence).
void validate(const DialogueExample& ex);

enum class PersonaMode { kOriginal, kRevised };

PersonaMode parse_persona_mode(std::string_view s);
std::string_view to_string(PersonaMode m);

/// Reads the ConvAI2 line format. `mode` must agree with the file name when
/// the name says "original" or "revised".
std::vector<DialogueExample> load_convai2(const std::filesystem::path& path, PersonaMode mode);

/// Reads CMUDoG conversations from a JSON file (array or one record per line)
/// or from a directory of per-conversation JSON files. Records either embed
/// the grounding document under "document" or point into a WikiData/ folder
/// next to the conversations via "wikiDocumentIdx".
std::vector<DialogueExample> load_cmudog(const std::filesystem::path& path);

/// Placeholder query used when a conversation opens with the gold turn.
inline constexpr std::string_view kSilenceToken = "__silence__";

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kSos = 2;
  static constexpr int kEos = 3;
  static constexpr int kReserved = 4;

  /// Reserved tokens only.
  Vocabulary();
  /// Reserved tokens followed by `tokens`, in order. Duplicates or reserved
  /// spellings in `tokens` are rejected.
  explicit Vocabulary(const std::vector<std::string>& tokens);

  int size() const { return static_cast<int>(id_to_token_.size()); }
  int id(std::string_view token) const;
  const std::string& token(int id) const;
  bool contains(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  std::vector<int> encode(const Tokens& tokens) const;
  /// Drops pad/sos/eos ids.
  Tokens decode(std::span<const int> ids) const;

  bool operator==(const Vocabulary& other) const { return id_to_token_ == other.id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

/// Keeps tokens seen at least `min_freq` times, most frequent first (ties in
/// lexicographic order), until the vocabulary holds `max_size` entries
/// including the reserved ones.
Vocabulary build_vocab(std::span<const DialogueExample> examples, int min_freq,
                       std::size_t max_size);

/// Dense row-major integer array with an explicit shape.
template <typename T>
struct Array3 {
  int d0 = 0, d1 = 0, d2 = 0;
  std::vector<T> data;

  Array3() = default;
  Array3(int a, int b, int c, T fill) : d0(a), d1(b), d2(c), data(std::size_t(a) * b * c, fill) {}
  T& at(int i, int j, int k) { return data[(std::size_t(i) * d1 + j) * d2 + k]; }
  const T& at(int i, int j, int k) const { return data[(std::size_t(i) * d1 + j) * d2 + k]; }
};

template <typename T>
struct Array2 {
  int d0 = 0, d1 = 0;
  std::vector<T> data;

  Array2() = default;
  Array2(int a, int b, T fill) : d0(a), d1(b), data(std::size_t(a) * b, fill) {}
  T& at(int i, int j) { return data[std::size_t(i) * d1 + j]; }
  const T& at(int i, int j) const { return data[std::size_t(i) * d1 + j]; }
};

/// One example's ids with padding stripped; what the model consumes.
struct ExampleIds {
  std::vector<std::vector<int>> persona_a;
  std::vector<std::vector<int>> persona_b;
  std::vector<std::vector<int>> context;
  /// Framed response: sos, tokens..., eos.
  std::vector<int> response;
};

struct BatchCaps {
  int k_max = 30;
  int l_c_max = 10;
  int l_p_max = 5;
};

/// Padded id tensors. For each sentence axis `*_lengths[b][slot]` is the
/// token count (0 for empty slots) and `*_mask` marks live positions.
/// `*_counts[b]` is the number of live slots.
struct Batch {
  Array3<int> persona_a_ids, persona_b_ids, context_ids;
  Array3<std::uint8_t> persona_a_mask, persona_b_mask, context_mask;
  Array2<int> persona_a_lengths, persona_b_lengths, context_lengths;
  std::vector<int> persona_a_counts, persona_b_counts, context_counts;
  /// [batch x (k_max + 2)]: sos, tokens..., eos, pad...
  Array2<int> response_ids;
  Array2<std::uint8_t> response_mask;
  std::vector<int> response_lengths;

  int size() const { return static_cast<int>(context_counts.size()); }
  ExampleIds example(int b) const;
};

Batch encode_batch(std::span<const DialogueExample> examples, const Vocabulary& vocab,
                   const BatchCaps& caps);

/// Reads whitespace-separated `token v_1 ... v_dim` lines. Rows for tokens in
/// the file are copied; the rest are U(-0.1, 0.1) under `seed`; the pad row
/// is zero.
Matrix load_pretrained_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                                  int dim = 300, std::uint64_t seed = 0);

}  // namespace persona
