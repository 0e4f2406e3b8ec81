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

#include "persona/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace persona {

void ModelConfig::validate() const {
  if (vocab_size < 5) throw std::invalid_argument("vocab_size must exceed the reserved ids");
  if (embed_dim < 1 || hidden < 1 || gru_hidden < 0 || attn_dim < 0) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
}

Encoder::Encoder(ParameterSet& params, const ModelConfig& config, Parameter* embedding) {
  const int d = config.hidden;
  const int h = config.direction_hidden();
  p_.embedding = embedding;
  p_.forward = GruCell::create(params, "encoder.gru_fwd", config.embed_dim, h);
  p_.backward = GruCell::create(params, "encoder.gru_bwd", config.embed_dim, h);
  p_.projection = &params.create("encoder.projection", d, 2 * h);
  p_.pool = AttentionPool::create(params, "encoder.pool", d, config.attention_dim());
  p_.style_a = &params.create("encoder.style_a", d, d);
  p_.style_b = &params.create("encoder.style_b", d, d);
}

void Encoder::init(std::mt19937_64& rng) const {
  p_.forward.init(rng);
  p_.backward.init(rng);
  const auto glorot = [](const Parameter& p) {
    return std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
  };
  init_uniform(*p_.projection, glorot(*p_.projection), rng);
  p_.pool.init(rng);
  init_uniform(*p_.style_a, glorot(*p_.style_a), rng);
  init_uniform(*p_.style_b, glorot(*p_.style_b), rng);
}

Encoder::BiGruOutput Encoder::bigru_encode(Graph& g, Var embeddings, int length,
                                           const Dropout& dropout) const {
  const Eigen::Index k = g.value(embeddings).cols();
  if (length < 1) throw std::invalid_argument("bigru_encode: zero-length sentence");
  if (length > k) throw std::invalid_argument("bigru_encode: length exceeds sentence width");

  const Eigen::Index h = p_.forward.hidden_size();
  BiGruOutput out;
  out.forward.resize(static_cast<std::size_t>(length));
  out.backward.resize(static_cast<std::size_t>(length));

  Var state = g.constant(Matrix::Zero(h, 1));
  for (int t = 0; t < length; ++t) {
    state = p_.forward.step(g, g.column(embeddings, t), state);
    out.forward[static_cast<std::size_t>(t)] = state;
  }
  state = g.constant(Matrix::Zero(h, 1));
  for (int t = length - 1; t >= 0; --t) {
    state = p_.backward.step(g, g.column(embeddings, t), state);
    out.backward[static_cast<std::size_t>(t)] = state;
  }

  std::vector<Var> cols;
  cols.reserve(static_cast<std::size_t>(k));
  for (int t = 0; t < length; ++t) {
    Var both = g.vconcat(out.forward[static_cast<std::size_t>(t)],
                         out.backward[static_cast<std::size_t>(t)]);
    cols.push_back(dropout.apply(g, both));
  }
  Var projected = g.matmul(g.param(*p_.projection), g.hstack(cols));
  if (length == k) {
    out.states = projected;
  } else {
    const Var pad = g.constant(Matrix::Zero(p_.projection->value.rows(), k - length));
    const Var parts[] = {projected, pad};
    out.states = g.hstack(parts);
  }
  return out;
}

AttentionPool::Result Encoder::attention_pool(Graph& g, Var states,
                                              std::span<const std::uint8_t> mask) const {
  return p_.pool.pool(g, states, mask);
}

Encoder::SentenceEncoding Encoder::encode(Graph& g, std::span<const int> ids,
                                          const Dropout& dropout) const {
  if (ids.empty()) throw std::invalid_argument("encode: empty sentence");
  std::vector<Var> cols;
  cols.reserve(ids.size());
  for (int id : ids) cols.push_back(g.lookup(*p_.embedding, id));
  Var emb = dropout.apply(g, g.hstack(cols));
  BiGruOutput enc = bigru_encode(g, emb, static_cast<int>(ids.size()), dropout);
  auto pooled = attention_pool(g, enc.states);
  return {pooled.pooled, enc.states, pooled.weights};
}

Var Encoder::encode_all(Graph& g, const std::vector<std::vector<int>>& sentences,
                        const Dropout& dropout) const {
  if (sentences.empty()) throw std::invalid_argument("encode_all: no sentences");
  std::vector<Var> cols;
  cols.reserve(sentences.size());
  for (const auto& s : sentences) cols.push_back(encode(g, s, dropout).pooled);
  return g.hstack(cols);
}

Var Encoder::speaking_style(Graph& g, Var persona_a, Var persona_b) const {
  if (g.value(persona_a).cols() < 1 || g.value(persona_b).cols() < 1) {
    throw std::invalid_argument("speaking_style: empty knowledge");
  }
  Var a = g.matmul(g.param(*p_.style_a), g.row_max(persona_a));
  Var b = g.matmul(g.param(*p_.style_b), g.row_max(persona_b));
  return g.cmul(a, b);
}

}  // namespace persona
