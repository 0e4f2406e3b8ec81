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

/// Persona knowledge as seen at one turn: the (updated) sentence encodings
/// and the coverage accumulated over earlier turns.
struct KnowledgeState {
  Var semantic;  // [d x l_p], one column per knowledge sentence
  Var coverage;  // [l_p x 1], nonnegative, grows by exactly 1 per turn
};

struct TurnSummary {
  Var raw;    // h^c_t, pooled encoding of the turn  [d x 1]
  Var aware;  // h^c'_t, persona-aware view          [d x 1]
};

/// Turn-level persona/conversation exchange with coverage tracking, plus the
/// turn-level GRU that folds the history into one context vector.
class Interaction {
 public:
  struct Params {
    Parameter* sem_w = nullptr;  // W_b [d_a x d]
    Parameter* sem_u = nullptr;  // V_b [d_a x d]
    Parameter* sem_v = nullptr;  //     [d_a x 1]
    Parameter* rep_w = nullptr;  // W_a [d_a x d]
    Parameter* rep_u = nullptr;  // V_a [d_a x d]
    Parameter* rep_c = nullptr;  // U_a [d_a x 1]
    Parameter* rep_v = nullptr;  //     [d_a x 1]
    Parameter* fuse_sem = nullptr;  // [d x d]
    Parameter* fuse_rep = nullptr;  // [d x d]
    Parameter* update_w = nullptr;  // W_p [d x 2d]
    Parameter* update_b = nullptr;  // b   [d x 1]
    GruCell turn_gru;               // [2d] -> d
    AttentionPool turn_pool;
  };

  struct Attention {
    Var weights;  // [1 x l_p], a probability vector
    Var summary;  // [d x 1]
  };

  struct Step {
    KnowledgeState next;
    TurnSummary summary;
    Var semantic_weights;  // e^sem_t
    Var coverage_weights;  // e^rep_t
  };

  struct History {
    Var context;               // O [d x 1]
    Var weights;               // [1 x l_c]
    std::vector<Var> outputs;  // turn GRU outputs
  };

  Interaction(ParameterSet& params, const ModelConfig& config);

  const Params& params() const { return p_; }
  const ModelConfig& config() const { return config_; }
  void init(std::mt19937_64& rng) const;

  /// h^{p(1)} = persona A encodings, s_1 = 0.
  KnowledgeState initial_state(Graph& g, Var persona_a) const;

  Attention semantic_attend(Graph& g, const KnowledgeState& state, Var turn) const;
  Attention coverage_attend(Graph& g, const KnowledgeState& state, Var turn) const;
  Var fuse_views(Graph& g, Var semantic_view, Var coverage_view) const;
  Var update_coverage(Graph& g, const KnowledgeState& state, Var coverage_weights) const;
  Var update_knowledge(Graph& g, const KnowledgeState& state, Var turn) const;

  /// One turn: attend (both heads), fuse, accumulate coverage, update knowledge.
  Step step(Graph& g, const KnowledgeState& state, Var turn) const;

  /// Runs the turn GRU over [h^c_i ; h^c'_i] and pools its outputs into O.
  History aggregate_history(Graph& g, std::span<const TurnSummary> turns) const;

 private:
  Params p_;
  ModelConfig config_;
};

}  // namespace persona
