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

#include "support.hpp"

#include <algorithm>
#include <cmath>

namespace persona::testing {

std::filesystem::path fixture_dir() { return PERSONA_FIXTURE_DIR; }

ModelConfig tiny_config(int vocab_size, int hidden, int embed_dim) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  c.hidden = hidden;
  c.embed_dim = embed_dim;
  c.dropout = 0.0;
  return c;
}

std::vector<int> random_sentence(std::mt19937_64& rng, int vocab_size, int length) {
  std::uniform_int_distribution<int> pick(Vocabulary::kReserved, vocab_size - 1);
  std::vector<int> out(static_cast<std::size_t>(length));
  for (auto& t : out) t = pick(rng);
  return out;
}

ExampleIds random_example(std::mt19937_64& rng, int vocab_size, int l_p, int l_c,
                          int sentence_len, int response_len) {
  std::uniform_int_distribution<int> len(1, sentence_len);
  ExampleIds ex;
  for (int i = 0; i < l_p; ++i) ex.persona_a.push_back(random_sentence(rng, vocab_size, len(rng)));
  for (int i = 0; i < l_p; ++i) ex.persona_b.push_back(random_sentence(rng, vocab_size, len(rng)));
  for (int i = 0; i < l_c; ++i) ex.context.push_back(random_sentence(rng, vocab_size, len(rng)));
  ex.response.push_back(Vocabulary::kSos);
  for (int t : random_sentence(rng, vocab_size, response_len)) ex.response.push_back(t);
  ex.response.push_back(Vocabulary::kEos);
  return ex;
}

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vector logistic(const Vector& x) {
  Vector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = logistic(x(i));
  return out;
}

Vector softmax(const Vector& x) {
  const double m = x.maxCoeff();
  Vector e(x.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) total += (e(i) = std::exp(x(i) - m));
  return e / total;
}

Vector gru_oracle(const GruCell& c, const Vector& x, const Vector& h) {
  const Vector z = logistic(c.wz->value * x + c.uz->value * h + c.bz->value.col(0));
  const Vector r = logistic(c.wr->value * x + c.ur->value * h + c.br->value.col(0));
  Vector n = c.wn->value * x + c.un->value * r.cwiseProduct(h) + c.bn->value.col(0);
  n = n.array().tanh();
  return (Vector::Ones(z.size()) - z).cwiseProduct(n) + z.cwiseProduct(h);
}

std::pair<Vector, Vector> pool_oracle(const AttentionPool& pool, const Matrix& states) {
  Vector scores(states.cols());
  for (Eigen::Index j = 0; j < states.cols(); ++j) {
    const Vector pre = (pool.w->value * states.col(j)).array().tanh();
    scores(j) = pool.v->value.col(0).dot(pre);
  }
  const Vector w = softmax(scores);
  return {w, states * w};
}

UnrolledInteraction unrolled_interaction(const Interaction& interaction, const Matrix& persona,
                                         const std::vector<Vector>& turns) {
  const auto& p = interaction.params();
  const auto& cfg = interaction.config();
  auto act = [&](const Vector& x) -> Vector {
    if (cfg.gate_activation == GateActivation::kTanh) return x.array().tanh();
    return logistic(x);
  };
  const Eigen::Index l_p = persona.cols();

  UnrolledInteraction out;
  Matrix hp = persona;
  Vector s = Vector::Zero(l_p);
  Vector h_turn = Vector::Zero(p.turn_gru.hidden_size());
  std::vector<Vector> gru_outputs;
  for (const Vector& hc : turns) {
    Vector sem_scores(l_p), rep_scores(l_p);
    for (Eigen::Index i = 0; i < l_p; ++i) {
      Vector a = p.sem_w->value * hp.col(i) + p.sem_u->value * hc;
      sem_scores(i) = p.sem_v->value.col(0).dot(Vector(a.array().tanh()));
      Vector b = p.rep_w->value * hp.col(i) + p.rep_u->value * hc;
      if (!cfg.no_coverage) b += p.rep_c->value.col(0) * s(i);
      rep_scores(i) = p.rep_v->value.col(0).dot(Vector(b.array().tanh()));
    }
    const Vector e_sem = softmax(sem_scores);
    const Vector e_rep = softmax(rep_scores);
    const Vector sem = hp * e_sem;
    const Vector rep = hp * e_rep;
    const Vector aware = act(p.fuse_sem->value * sem + p.fuse_rep->value * rep);

    s += e_rep;
    if (!cfg.no_knowledge_update) {
      Matrix next = hp;
      for (Eigen::Index i = 0; i < l_p; ++i) {
        Vector joined(2 * hc.size());
        joined << hp.col(i) + hc, hp.col(i).cwiseProduct(hc);
        next.col(i) = hp.col(i) + act(p.update_w->value * joined + p.update_b->value.col(0));
      }
      hp = next;
    }

    Vector turn_in(2 * hc.size());
    turn_in << hc, aware;
    h_turn = gru_oracle(p.turn_gru, turn_in, h_turn);
    gru_outputs.push_back(h_turn);

    out.semantic_weights.push_back(e_sem);
    out.coverage_weights.push_back(e_rep);
    out.aware.push_back(aware);
  }
  Matrix outputs(h_turn.size(), static_cast<Eigen::Index>(gru_outputs.size()));
  for (std::size_t i = 0; i < gru_outputs.size(); ++i) outputs.col(static_cast<Eigen::Index>(i)) = gru_outputs[i];
  out.context = pool_oracle(p.turn_pool, outputs).second;
  out.semantic = hp;
  out.coverage = s;
  return out;
}

namespace {

// Occurrences of the n-gram starting at `at` in `seq`, by linear scan.
long occurrences(const Tokens& gram_src, std::size_t at, int n, const Tokens& seq) {
  long count = 0;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    bool same = true;
    for (int k = 0; k < n && same; ++k) same = seq[i + k] == gram_src[at + k];
    count += same;
  }
  return count;
}

}  // namespace

double brute_force_bleu(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs, int n,
                        double epsilon) {
  double log_p = 0.0;
  for (int order = 1; order <= n; ++order) {
    double clipped = 0.0, total = 0.0;
    for (std::size_t h = 0; h < hyps.size(); ++h) {
      const Tokens& hyp = hyps[h];
      for (std::size_t i = 0; i + order <= hyp.size(); ++i) {
        // Count each distinct n-gram once, at its first occurrence.
        bool first = true;
        for (std::size_t j = 0; j < i && first; ++j) {
          bool same = true;
          for (int k = 0; k < order && same; ++k) same = hyp[j + k] == hyp[i + k];
          first = !same;
        }
        total += 1.0;
        if (!first) continue;
        const long in_hyp = occurrences(hyp, i, order, hyp);
        const long in_ref = occurrences(hyp, i, order, refs[h]);
        clipped += static_cast<double>(std::min(in_hyp, in_ref));
      }
    }
    const double p = clipped > 0.0 && total > 0.0 ? clipped / total : epsilon;
    log_p += std::log(p) / n;
  }
  double c = 0.0, r = 0.0;
  for (const auto& h : hyps) c += static_cast<double>(h.size());
  for (const auto& x : refs) r += static_cast<double>(x.size());
  const double bp = c == 0.0 ? 0.0 : (c < r ? std::exp(1.0 - r / c) : 1.0);
  return bp * std::exp(log_p);
}

GradientCheck check_gradients(ParameterSet& params, const std::function<Var(Graph&)>& loss,
                              double step, double floor) {
  params.zero_grad();
  {
    Graph g;
    g.backward(loss(g));
  }
  auto evaluate = [&] {
    Graph g(false);
    return g.value(loss(g))(0, 0);
  };
  GradientCheck out;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = params[pi];
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double saved = p.value.data()[i];
      p.value.data()[i] = saved + step;
      const double up = evaluate();
      p.value.data()[i] = saved - step;
      const double down = evaluate();
      p.value.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = p.grad.data()[i];
      const double rel = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), floor});
      ++out.checked;
      if (rel > out.max_relative_error) {
        out.max_relative_error = rel;
        out.worst = p.name + "[" + std::to_string(i) + "] analytic=" + std::to_string(analytic) +
                    " numeric=" + std::to_string(numeric);
      }
    }
  }
  return out;
}

}  // namespace persona::testing
