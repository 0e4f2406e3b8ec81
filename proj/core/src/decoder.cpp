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

#include "persona/decoder.hpp"

#include "persona/data.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace persona {

Decoder::Decoder(ParameterSet& params, const ModelConfig& config, Parameter* embedding)
    : config_(config) {
  const int d = config.hidden;
  p_.embedding = embedding;
  p_.token_gru = GruCell::create(params, "decoder.token_gru", config.embed_dim, d);
  p_.style_gru = GruCell::create(params, "decoder.style_gru", d, d);
  p_.gate_token = &params.create("decoder.gate_token", d, d);
  p_.gate_style = &params.create("decoder.gate_style", d, d);
  p_.gate_mix = &params.create("decoder.gate_mix", d, 2 * d);
  p_.init = &params.create("decoder.init", d, d);
  p_.out_w = &params.create("decoder.out_w", config.vocab_size, d + config.embed_dim);
  p_.out_b = &params.create("decoder.out_b", config.vocab_size, 1);
  vocab_mask_.assign(static_cast<std::size_t>(config.vocab_size), 1);
  vocab_mask_[Vocabulary::kPad] = 0;
}

void Decoder::init(std::mt19937_64& rng) const {
  p_.token_gru.init(rng);
  p_.style_gru.init(rng);
  for (Parameter* p : {p_.gate_token, p_.gate_style, p_.gate_mix, p_.init, p_.out_w}) {
    init_uniform(*p, std::sqrt(6.0 / static_cast<double>(p->value.rows() + p->value.cols())), rng);
  }
  p_.out_b->value.setZero();
}

DecoderState Decoder::init_state(Graph& g, Var context) const {
  return {g.tanh(g.matmul(g.param(*p_.init), context)), Vocabulary::kSos};
}

Decoder::Fusion Decoder::hgfu_step(Graph& g, Var hidden, Var prev_embedding, Var style) const {
  Fusion f;
  f.token_state = p_.token_gru.step(g, prev_embedding, hidden);
  if (config_.no_style) {
    f.hidden = f.token_state;
    return f;
  }
  f.style_state = p_.style_gru.step(g, style, hidden);
  Var token_view = g.tanh(g.matmul(g.param(*p_.gate_token), f.token_state));
  Var style_view = g.tanh(g.matmul(g.param(*p_.gate_style), f.style_state));
  f.gate = g.sigmoid(g.matmul(g.param(*p_.gate_mix), g.vconcat(token_view, style_view)));
  // r .* s^y + (1 - r) .* s^p
  f.hidden = g.add(g.cmul(f.gate, f.token_state),
                   g.cmul(g.affine(f.gate, -1.0, 1.0), f.style_state));
  return f;
}

Var Decoder::logits(Graph& g, Var hidden, Var prev_embedding) const {
  return g.add(g.matmul(g.param(*p_.out_w), g.vconcat(hidden, prev_embedding)),
               g.param(*p_.out_b));
}

Var Decoder::output_distribution(Graph& g, Var hidden, Var prev_embedding) const {
  return g.softmax(logits(g, hidden, prev_embedding), vocab_mask_);
}

Var Decoder::output_log_distribution(Graph& g, Var hidden, Var prev_embedding) const {
  return g.log_softmax(logits(g, hidden, prev_embedding), vocab_mask_);
}

Var Decoder::sequence_nll(Graph& g, Var context, Var style, std::span<const int> framed,
                          const Dropout& dropout) const {
  if (framed.size() < 2) throw std::invalid_argument("sequence_nll: response needs sos and eos");
  Var hidden = init_state(g, context).hidden;
  std::vector<Var> picks;
  picks.reserve(framed.size() - 1);
  for (std::size_t t = 0; t + 1 < framed.size(); ++t) {
    const int target = framed[t + 1];
    if (target == Vocabulary::kPad) throw std::invalid_argument("sequence_nll: pad target");
    Var emb = dropout.apply(g, g.lookup(*p_.embedding, framed[t]));
    hidden = hgfu_step(g, hidden, emb, style).hidden;
    picks.push_back(g.pick(output_log_distribution(g, hidden, emb), target));
  }
  return g.affine(g.add_n(picks), -1.0, 0.0);
}

namespace {

int argmax_lowest(const Matrix& logp) {
  int best = 0;
  for (Eigen::Index i = 1; i < logp.size(); ++i) {
    if (logp(i) > logp(best)) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace

Hypothesis Decoder::greedy_hypothesis(const Matrix& context, const Matrix& style,
                                      int max_len) const {
  if (max_len < 1) throw std::invalid_argument("greedy_decode: max_len must be >= 1");
  Graph g(false);
  Var sty = g.constant(style);
  DecoderState st = init_state(g, g.constant(context));
  Hypothesis h;
  double total = 0.0;
  int count = 0;
  for (int step = 0; step < max_len; ++step) {
    Var emb = g.lookup(*p_.embedding, st.prev_token);
    Var hidden = hgfu_step(g, st.hidden, emb, sty).hidden;
    const Matrix& logp = g.value(output_log_distribution(g, hidden, emb));
    const int best = argmax_lowest(logp);
    total += logp(best);
    ++count;
    if (best == Vocabulary::kEos) {
      h.finished = true;
      break;
    }
    h.tokens.push_back(best);
    st = {hidden, best};
  }
  h.score = total / count;
  return h;
}

std::vector<int> Decoder::greedy_decode(const Matrix& context, const Matrix& style,
                                        int max_len) const {
  return greedy_hypothesis(context, style, max_len).tokens;
}

Hypothesis Decoder::beam_decode(const Matrix& context, const Matrix& style, int beam_size,
                                int max_len) const {
  if (beam_size < 1) throw std::invalid_argument("beam_decode: beam_size must be >= 1");
  if (max_len < 1) throw std::invalid_argument("beam_decode: max_len must be >= 1");

  struct Live {
    std::vector<int> tokens;
    double total = 0.0;
    DecoderState state;
  };
  struct Candidate {
    double total;
    double step;
    std::size_t parent;
    int token;
  };

  Graph g(false);
  Var sty = g.constant(style);
  std::vector<Live> beam{{{}, 0.0, init_state(g, g.constant(context))}};
  std::vector<Hypothesis> done;

  for (int step = 0; step < max_len && !beam.empty(); ++step) {
    std::vector<Candidate> cands;
    std::vector<Var> hiddens;
    for (std::size_t i = 0; i < beam.size(); ++i) {
      Var emb = g.lookup(*p_.embedding, beam[i].state.prev_token);
      Var hidden = hgfu_step(g, beam[i].state.hidden, emb, sty).hidden;
      hiddens.push_back(hidden);
      const Matrix& logp = g.value(output_log_distribution(g, hidden, emb));
      for (Eigen::Index t = 0; t < logp.size(); ++t) {
        if (t == Vocabulary::kPad) continue;
        cands.push_back({beam[i].total + logp(t), logp(t), i, static_cast<int>(t)});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.total != b.total) return a.total > b.total;
      if (a.step != b.step) return a.step > b.step;
      if (a.parent != b.parent) return a.parent < b.parent;
      return a.token < b.token;
    });

    std::vector<Live> next;
    const std::size_t take = std::min(cands.size(), static_cast<std::size_t>(beam_size));
    for (std::size_t i = 0; i < take; ++i) {
      const Candidate& c = cands[i];
      const Live& parent = beam[c.parent];
      if (c.token == Vocabulary::kEos) {
        Hypothesis h;
        h.tokens = parent.tokens;
        h.score = c.total / static_cast<double>(parent.tokens.size() + 1);
        h.finished = true;
        done.push_back(std::move(h));
      } else {
        Live l{parent.tokens, c.total, {hiddens[c.parent], c.token}};
        l.tokens.push_back(c.token);
        next.push_back(std::move(l));
      }
    }
    beam = std::move(next);
    if (static_cast<int>(done.size()) >= beam_size) break;
  }

  std::vector<Hypothesis> pool = std::move(done);
  for (auto& l : beam) {
    Hypothesis h;
    h.score = l.total / static_cast<double>(l.tokens.size());
    h.tokens = std::move(l.tokens);
    pool.push_back(std::move(h));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < pool.size(); ++i) {
    if (pool[i].score > pool[best].score) best = i;
  }
  Hypothesis result = std::move(pool[best]);
  if (beam_size > 1) {
    Hypothesis greedy = greedy_hypothesis(context, style, max_len);
    if (greedy.score > result.score) return greedy;
  }
  return result;
}

double nll_loss(std::span<const Vector> distributions, std::span<const int> targets,
                std::span<const std::uint8_t> mask) {
  if (distributions.size() != targets.size() || targets.size() != mask.size()) {
    throw std::invalid_argument("nll_loss: length mismatch");
  }
  double total = 0.0;
  int count = 0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (!mask[t]) continue;
    if (targets[t] == Vocabulary::kPad) throw std::invalid_argument("nll_loss: pad target");
    if (targets[t] < 0 || targets[t] >= distributions[t].size()) {
      throw std::invalid_argument("nll_loss: target outside vocabulary");
    }
    total -= std::log(distributions[t](targets[t]));
    ++count;
  }
  return count == 0 ? 0.0 : total / count;
}

}  // namespace persona
