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

#include "persona/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace persona {

Parameter& ParameterSet::create(std::string name, Eigen::Index rows, Eigen::Index cols) {
  if (find(name) != nullptr) throw std::invalid_argument("duplicate parameter: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->value = Matrix::Zero(rows, cols);
  p->grad = Matrix::Zero(rows, cols);
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterSet::find(std::string_view name) {
  for (auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

const Parameter* ParameterSet::find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void init_uniform(Parameter& p, double scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value(i) = dist(rng);
}

Var gate(Graph& g, Var x, GateActivation act) {
  return act == GateActivation::kLogistic ? g.sigmoid(x) : g.tanh(x);
}

Var Dropout::apply(Graph& g, Var x) const {
  if (!active()) return x;
  const Matrix& v = g.value(x);
  Matrix mask(v.rows(), v.cols());
  std::bernoulli_distribution keep(1.0 - rate_);
  const double scale = 1.0 / (1.0 - rate_);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask(i) = keep(*rng_) ? scale : 0.0;
  return g.mask_mul(x, mask);
}

GruCell GruCell::create(ParameterSet& params, const std::string& prefix, Eigen::Index input,
                        Eigen::Index hidden) {
  GruCell c;
  c.wz = &params.create(prefix + ".wz", hidden, input);
  c.wr = &params.create(prefix + ".wr", hidden, input);
  c.wn = &params.create(prefix + ".wn", hidden, input);
  c.uz = &params.create(prefix + ".uz", hidden, hidden);
  c.ur = &params.create(prefix + ".ur", hidden, hidden);
  c.un = &params.create(prefix + ".un", hidden, hidden);
  c.bz = &params.create(prefix + ".bz", hidden, 1);
  c.br = &params.create(prefix + ".br", hidden, 1);
  c.bn = &params.create(prefix + ".bn", hidden, 1);
  return c;
}

Var GruCell::step(Graph& g, Var x, Var h) const {
  auto lin = [&](Parameter* w, Var in) { return g.matmul(g.param(*w), in); };
  Var z = g.sigmoid(g.add(g.add(lin(wz, x), lin(uz, h)), g.param(*bz)));
  Var r = g.sigmoid(g.add(g.add(lin(wr, x), lin(ur, h)), g.param(*br)));
  Var n = g.tanh(g.add(g.add(lin(wn, x), lin(un, g.cmul(r, h))), g.param(*bn)));
  // (1 - z) .* n + z .* h
  return g.add(g.cmul(g.affine(z, -1.0, 1.0), n), g.cmul(z, h));
}

void GruCell::init(std::mt19937_64& rng) const {
  const double scale = 1.0 / std::sqrt(static_cast<double>(hidden_size()));
  for (Parameter* p : {wz, wr, wn, uz, ur, un, bz, br, bn}) init_uniform(*p, scale, rng);
}

AttentionPool AttentionPool::create(ParameterSet& params, const std::string& prefix,
                                    Eigen::Index dim, Eigen::Index attn_dim) {
  AttentionPool a;
  a.w = &params.create(prefix + ".w", attn_dim, dim);
  a.v = &params.create(prefix + ".v", attn_dim, 1);
  return a;
}

AttentionPool::Result AttentionPool::pool(Graph& g, Var states,
                                          std::span<const std::uint8_t> mask) const {
  Var hidden = g.tanh(g.matmul(g.param(*w), states));
  Var scores = g.matmul(g.transpose(g.param(*v)), hidden);  // [1 x k]
  Var weights = g.softmax(scores, mask);
  Var pooled = g.matmul(states, g.transpose(weights));
  return {weights, pooled};
}

void AttentionPool::init(std::mt19937_64& rng) const {
  const double scale = std::sqrt(6.0 / static_cast<double>(w->value.rows() + w->value.cols()));
  init_uniform(*w, scale, rng);
  init_uniform(*v, std::sqrt(6.0 / static_cast<double>(v->value.rows() + 1)), rng);
}

}  // namespace persona
