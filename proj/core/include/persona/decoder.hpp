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

struct DecoderState {
  Var hidden;  // s_t [d x 1]
  int prev_token = 0;
};

struct DecodeConfig {
  int beam_size = 1;
  int max_len = 30;
};

/// A finished (or length-capped) hypothesis. `score` is the mean log-prob
/// over every emitted token, the end token included when it was emitted.
struct Hypothesis {
  std::vector<int> tokens;  // without sos/eos
  double score = 0.0;
  bool finished = false;
};

/// Gated fusion decoder: a token GRU and a style GRU share the previous
/// hidden state; a learned gate mixes their outputs.
class Decoder {
 public:
  struct Params {
    Parameter* embedding = nullptr;  // shared with the encoder
    GruCell token_gru;               // embed -> d
    GruCell style_gru;               // d -> d
    Parameter* gate_token = nullptr;  // W_y  [d x d]
    Parameter* gate_style = nullptr;  // W_p' [d x d]
    Parameter* gate_mix = nullptr;    // V    [d x 2d]
    Parameter* init = nullptr;        // [d x d]
    Parameter* out_w = nullptr;       // [|V| x (d + embed)]
    Parameter* out_b = nullptr;       // [|V| x 1]
  };

  struct Fusion {
    Var hidden;        // s_t
    Var token_state;   // s^y_t
    Var style_state;   // s^p_t (invalid when style is disabled)
    Var gate;          // r     (invalid when style is disabled)
  };

  Decoder(ParameterSet& params, const ModelConfig& config, Parameter* embedding);

  const Params& params() const { return p_; }
  void init(std::mt19937_64& rng) const;

  /// s_0 = tanh(W_init O), previous token = sos.
  DecoderState init_state(Graph& g, Var context) const;

  Fusion hgfu_step(Graph& g, Var hidden, Var prev_embedding, Var style) const;

  Var logits(Graph& g, Var hidden, Var prev_embedding) const;
  /// Softmax over the vocabulary with the pad id pinned to probability 0.
  Var output_distribution(Graph& g, Var hidden, Var prev_embedding) const;
  Var output_log_distribution(Graph& g, Var hidden, Var prev_embedding) const;

  /// Teacher-forced NLL summed over the n + 1 targets of a framed response
  /// (sos, y_1..y_n, eos). Returns a [1 x 1] node.
  Var sequence_nll(Graph& g, Var context, Var style, std::span<const int> framed,
                   const Dropout& dropout = {}) const;

  std::vector<int> greedy_decode(const Matrix& context, const Matrix& style, int max_len) const;
  Hypothesis greedy_hypothesis(const Matrix& context, const Matrix& style, int max_len) const;
  /// Length-normalized beam search. beam_size 1 is exactly greedy; for wider
  /// beams the greedy path is kept as a candidate so the result never scores
  /// below it.
  Hypothesis beam_decode(const Matrix& context, const Matrix& style, int beam_size,
                         int max_len) const;

 private:
  std::vector<std::uint8_t> vocab_mask_;
  Params p_;
  ModelConfig config_;
};

/// Mean over live positions of -log p(target). A live position whose target
/// is the pad id violates the contract.
double nll_loss(std::span<const Vector> distributions, std::span<const int> targets,
                std::span<const std::uint8_t> mask);

}  // namespace persona
