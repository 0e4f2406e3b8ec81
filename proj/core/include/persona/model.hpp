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
#include "persona/decoder.hpp"
#include "persona/encoder.hpp"
#include "persona/interaction.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace persona {

/// Full persona-aware response generator. Owns its parameters.
class PersonaModel {
 public:
  /// Everything computed from (personas, context) before decoding.
  struct Encoded {
    Var persona_a;  // [d x l_p]
    Var persona_b;  // [d x l_p'] (persona A again when B is absent)
    Var style;      // h_sty [d x 1]
    KnowledgeState initial;
    std::vector<Interaction::Step> steps;
    Interaction::History history;

    const KnowledgeState& final_state() const {
      return steps.empty() ? initial : steps.back().next;
    }
  };

  /// Plain-value snapshot of Encoded, detached from any graph.
  struct Snapshot {
    Matrix style;
    Matrix context;
    Matrix knowledge;
    Vector coverage;
    Vector last_semantic_weights;
    Vector last_coverage_weights;
    int interaction_steps = 0;
  };

  PersonaModel(const ModelConfig& config, std::uint64_t seed);

  PersonaModel(const PersonaModel&) = delete;
  PersonaModel& operator=(const PersonaModel&) = delete;

  const ModelConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  Parameter& embedding() { return *embedding_; }

  const Encoder& encoder() const { return *encoder_; }
  const Interaction& interaction() const { return *interaction_; }
  const Decoder& decoder() const { return *decoder_; }

  Encoded encode(Graph& g, const ExampleIds& ex, const Dropout& dropout = {}) const;
  Snapshot snapshot(const ExampleIds& ex) const;

  /// Teacher-forced NLL summed over the response targets.
  Var sequence_nll(Graph& g, const ExampleIds& ex, const Dropout& dropout = {}) const;
  /// Mean per-token NLL, no dropout, values only.
  double token_loss(const ExampleIds& ex) const;

  std::vector<int> generate(const ExampleIds& ex, const DecodeConfig& decode) const;

 private:
  ModelConfig config_;
  ParameterSet params_;
  Parameter* embedding_ = nullptr;
  std::unique_ptr<Encoder> encoder_;
  std::unique_ptr<Interaction> interaction_;
  std::unique_ptr<Decoder> decoder_;
};

}  // namespace persona
