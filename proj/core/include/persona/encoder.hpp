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

#include "persona/layers.hpp"
#include "persona/model_config.hpp"

#include <span>
#include <vector>

namespace persona {

/// Sentence encoder (bidirectional GRU + attention pooling) and the
/// speaking-style map over both speakers' knowledge.
class Encoder {
 public:
  struct Params {
    Parameter* embedding = nullptr;  // [|V| x embed], shared with the decoder
    GruCell forward;
    GruCell backward;
    Parameter* projection = nullptr;  // [d x 2H]
    AttentionPool pool;               // W_h [d_a x d], v [d_a]
    Parameter* style_a = nullptr;     // [d x d] applied to persona A's max-pool
    Parameter* style_b = nullptr;     // [d x d] applied to persona B's max-pool
  };

  struct BiGruOutput {
    Var states;  // [d x k]; columns at and past `length` are zero
    std::vector<Var> forward;   // [H x 1] per live position
    std::vector<Var> backward;  // [H x 1] per live position (indexed by position)
  };

  struct SentenceEncoding {
    Var pooled;   // h' [d x 1]
    Var states;   // [d x length]
    Var weights;  // [1 x length]
  };

  Encoder(ParameterSet& params, const ModelConfig& config, Parameter* embedding);

  const Params& params() const { return p_; }
  void init(std::mt19937_64& rng) const;

  /// `embeddings` is [embed x k]; only the first `length` columns are read.
  BiGruOutput bigru_encode(Graph& g, Var embeddings, int length,
                           const Dropout& dropout = {}) const;

  /// Pools the columns of `states` ([d x k]). At least one position must be live.
  AttentionPool::Result attention_pool(Graph& g, Var states,
                                       std::span<const std::uint8_t> mask = {}) const;

  /// f_enc over a sentence of token ids (no padding).
  SentenceEncoding encode(Graph& g, std::span<const int> ids, const Dropout& dropout = {}) const;

  /// Encodes every sentence; returns [d x n] with one pooled column each.
  Var encode_all(Graph& g, const std::vector<std::vector<int>>& sentences,
                 const Dropout& dropout = {}) const;

  /// h_sty = (U maxpool(h_a)) .* (V maxpool(h_b)); inputs are [d x l_p] with
  /// one column per knowledge sentence.
  Var speaking_style(Graph& g, Var persona_a, Var persona_b) const;

 private:
  Params p_;
};

}  // namespace persona
