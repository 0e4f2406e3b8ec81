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

#include "persona/model.hpp"

#include <stdexcept>

namespace persona {

PersonaModel::PersonaModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  embedding_ = &params_.create("embedding", config_.vocab_size, config_.embed_dim);
  encoder_ = std::make_unique<Encoder>(params_, config_, embedding_);
  interaction_ = std::make_unique<Interaction>(params_, config_);
  decoder_ = std::make_unique<Decoder>(params_, config_, embedding_);

  std::mt19937_64 rng(seed);
  init_uniform(*embedding_, 0.1, rng);
  embedding_->value.row(Vocabulary::kPad).setZero();
  encoder_->init(rng);
  interaction_->init(rng);
  decoder_->init(rng);
}

PersonaModel::Encoded PersonaModel::encode(Graph& g, const ExampleIds& ex,
                                           const Dropout& dropout) const {
  if (ex.persona_a.empty()) throw std::invalid_argument("example has no persona A knowledge");
  if (ex.context.empty()) throw std::invalid_argument("example has no context");
  Encoded out;
  out.persona_a = encoder_->encode_all(g, ex.persona_a, dropout);
  out.persona_b =
      ex.persona_b.empty() ? out.persona_a : encoder_->encode_all(g, ex.persona_b, dropout);
  if (!config_.no_style) out.style = encoder_->speaking_style(g, out.persona_a, out.persona_b);

  out.initial = interaction_->initial_state(g, out.persona_a);
  KnowledgeState state = out.initial;
  std::vector<TurnSummary> summaries;
  for (const auto& turn : ex.context) {
    Var raw = encoder_->encode(g, turn, dropout).pooled;
    out.steps.push_back(interaction_->step(g, state, raw));
    state = out.steps.back().next;
    summaries.push_back(out.steps.back().summary);
  }
  out.history = interaction_->aggregate_history(g, summaries);
  return out;
}

PersonaModel::Snapshot PersonaModel::snapshot(const ExampleIds& ex) const {
  Graph g(false);
  Encoded enc = encode(g, ex);
  Snapshot s;
  s.style = config_.no_style ? Matrix::Zero(config_.hidden, 1) : g.value(enc.style);
  s.context = g.value(enc.history.context);
  s.knowledge = g.value(enc.final_state().semantic);
  s.coverage = g.value(enc.final_state().coverage).col(0);
  s.last_semantic_weights = g.value(enc.steps.back().semantic_weights).row(0).transpose();
  s.last_coverage_weights = g.value(enc.steps.back().coverage_weights).row(0).transpose();
  s.interaction_steps = static_cast<int>(enc.steps.size());
  return s;
}

Var PersonaModel::sequence_nll(Graph& g, const ExampleIds& ex, const Dropout& dropout) const {
  Encoded enc = encode(g, ex, dropout);
  Var style = config_.no_style ? g.constant(Matrix::Zero(config_.hidden, 1)) : enc.style;
  return decoder_->sequence_nll(g, enc.history.context, style, ex.response, dropout);
}

double PersonaModel::token_loss(const ExampleIds& ex) const {
  Graph g(false);
  const double total = g.value(sequence_nll(g, ex))(0, 0);
  return total / static_cast<double>(ex.response.size() - 1);
}

std::vector<int> PersonaModel::generate(const ExampleIds& ex, const DecodeConfig& decode) const {
  Snapshot s = snapshot(ex);
  if (decode.beam_size <= 1) return decoder_->greedy_decode(s.context, s.style, decode.max_len);
  return decoder_->beam_decode(s.context, s.style, decode.beam_size, decode.max_len).tokens;
}

}  // namespace persona
