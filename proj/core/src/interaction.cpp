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

#include "persona/interaction.hpp"

#include <cmath>
#include <stdexcept>

namespace persona {

Interaction::Interaction(ParameterSet& params, const ModelConfig& config) : config_(config) {
  const int d = config.hidden;
  const int a = config.attention_dim();
  p_.sem_w = &params.create("interaction.sem_w", a, d);
  p_.sem_u = &params.create("interaction.sem_u", a, d);
  p_.sem_v = &params.create("interaction.sem_v", a, 1);
  p_.rep_w = &params.create("interaction.rep_w", a, d);
  p_.rep_u = &params.create("interaction.rep_u", a, d);
  p_.rep_c = &params.create("interaction.rep_c", a, 1);
  p_.rep_v = &params.create("interaction.rep_v", a, 1);
  p_.fuse_sem = &params.create("interaction.fuse_sem", d, d);
  p_.fuse_rep = &params.create("interaction.fuse_rep", d, d);
  p_.update_w = &params.create("interaction.update_w", d, 2 * d);
  p_.update_b = &params.create("interaction.update_b", d, 1);
  p_.turn_gru = GruCell::create(params, "interaction.turn_gru", 2 * d, d);
  p_.turn_pool = AttentionPool::create(params, "interaction.turn_pool", d, a);
}

void Interaction::init(std::mt19937_64& rng) const {
  const auto glorot = [](const Parameter* p) {
    return std::sqrt(6.0 / static_cast<double>(p->value.rows() + p->value.cols()));
  };
  for (Parameter* p : {p_.sem_w, p_.sem_u, p_.sem_v, p_.rep_w, p_.rep_u, p_.rep_c, p_.rep_v,
                       p_.fuse_sem, p_.fuse_rep, p_.update_w}) {
    init_uniform(*p, glorot(p), rng);
  }
  p_.update_b->value.setZero();
  p_.turn_gru.init(rng);
  p_.turn_pool.init(rng);
}

KnowledgeState Interaction::initial_state(Graph& g, Var persona_a) const {
  const Eigen::Index l_p = g.value(persona_a).cols();
  if (l_p < 1) throw std::invalid_argument("initial_state: no knowledge sentences");
  return {persona_a, g.constant(Matrix::Zero(l_p, 1))};
}

namespace {

Interaction::Attention attend(Graph& g, Var knowledge, Var scores_pre, Parameter& v) {
  Var scores = g.matmul(g.transpose(g.param(v)), g.tanh(scores_pre));  // [1 x l_p]
  Var weights = g.softmax(scores);
  return {weights, g.matmul(knowledge, g.transpose(weights))};
}

}  // namespace

Interaction::Attention Interaction::semantic_attend(Graph& g, const KnowledgeState& state,
                                                    Var turn) const {
  Var pre = g.add_col(g.matmul(g.param(*p_.sem_w), state.semantic),
                      g.matmul(g.param(*p_.sem_u), turn));
  return attend(g, state.semantic, pre, *p_.sem_v);
}

Interaction::Attention Interaction::coverage_attend(Graph& g, const KnowledgeState& state,
                                                    Var turn) const {
  Var pre = g.add_col(g.matmul(g.param(*p_.rep_w), state.semantic),
                      g.matmul(g.param(*p_.rep_u), turn));
  if (!config_.no_coverage) {
    // U_a maps each scalar coverage entry into attention space.
    pre = g.add(pre, g.matmul(g.param(*p_.rep_c), g.transpose(state.coverage)));
  }
  return attend(g, state.semantic, pre, *p_.rep_v);
}

Var Interaction::fuse_views(Graph& g, Var semantic_view, Var coverage_view) const {
  Var pre = g.add(g.matmul(g.param(*p_.fuse_sem), semantic_view),
                  g.matmul(g.param(*p_.fuse_rep), coverage_view));
  return gate(g, pre, config_.gate_activation);
}

Var Interaction::update_coverage(Graph& g, const KnowledgeState& state,
                                 Var coverage_weights) const {
  return g.add(state.coverage, g.transpose(coverage_weights));
}

Var Interaction::update_knowledge(Graph& g, const KnowledgeState& state, Var turn) const {
  Var summed = g.add_col(state.semantic, turn);
  Var product = g.cmul_col(state.semantic, turn);
  Var pre = g.add_col(g.matmul(g.param(*p_.update_w), g.vconcat(summed, product)),
                      g.param(*p_.update_b));
  return g.add(state.semantic, gate(g, pre, config_.gate_activation));
}

Interaction::Step Interaction::step(Graph& g, const KnowledgeState& state, Var turn) const {
  Attention sem = semantic_attend(g, state, turn);
  Attention rep = coverage_attend(g, state, turn);
  Var aware = fuse_views(g, sem.summary, rep.summary);
  Step out;
  out.next.coverage = update_coverage(g, state, rep.weights);
  out.next.semantic =
      config_.no_knowledge_update ? state.semantic : update_knowledge(g, state, turn);
  out.summary = {turn, aware};
  out.semantic_weights = sem.weights;
  out.coverage_weights = rep.weights;
  return out;
}

Interaction::History Interaction::aggregate_history(Graph& g,
                                                    std::span<const TurnSummary> turns) const {
  if (turns.empty()) throw std::invalid_argument("aggregate_history: empty history");
  const Eigen::Index d = p_.turn_gru.hidden_size();
  History out;
  Var state = g.constant(Matrix::Zero(d, 1));
  for (const auto& t : turns) {
    state = p_.turn_gru.step(g, g.vconcat(t.raw, t.aware), state);
    out.outputs.push_back(state);
  }
  auto pooled = p_.turn_pool.pool(g, g.hstack(out.outputs));
  out.context = pooled.pooled;
  out.weights = pooled.weights;
  return out;
}

}  // namespace persona
