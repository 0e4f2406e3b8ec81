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

// Helpers shared by the unit tests and the acceptance runner. The oracles
// here are written against plain Eigen values and never touch Graph, so they
// are an independent code path from the library.
#pragma once

#include "persona/data.hpp"
#include "persona/interaction.hpp"
#include "persona/model.hpp"

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace persona::testing {

std::filesystem::path fixture_dir();

/// A small network for fast tests (dropout off).
ModelConfig tiny_config(int vocab_size, int hidden, int embed_dim = 6);

std::vector<int> random_sentence(std::mt19937_64& rng, int vocab_size, int length);
ExampleIds random_example(std::mt19937_64& rng, int vocab_size, int l_p, int l_c,
                          int sentence_len, int response_len);
Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                     double scale = 1.0);

double logistic(double x);
Vector logistic(const Vector& x);
Vector softmax(const Vector& x);

/// One GRU step computed directly from the parameter values.
Vector gru_oracle(const GruCell& cell, const Vector& x, const Vector& h);
/// softmax(v^T tanh(W H)) and H times those weights.
std::pair<Vector, Vector> pool_oracle(const AttentionPool& pool, const Matrix& states);

/// Straight-line evaluation of the turn recurrence and history aggregation.
struct UnrolledInteraction {
  Matrix semantic;  // final knowledge states [d x l_p]
  Vector coverage;  // final coverage
  std::vector<Vector> semantic_weights, coverage_weights, aware;
  Vector context;   // O
};
UnrolledInteraction unrolled_interaction(const Interaction& interaction, const Matrix& persona,
                                         const std::vector<Vector>& turns);

/// Corpus BLEU recomputed by brute-force linear scans (no maps, no hashing).
double brute_force_bleu(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs, int n,
                        double epsilon);

struct GradientCheck {
  double max_relative_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

/// Compares Parameter::grad after one backward pass of `loss` with central
/// differences for every parameter entry. Relative error is
/// |a - n| / max(|a|, |n|, floor).
GradientCheck check_gradients(ParameterSet& params, const std::function<Var(Graph&)>& loss,
                              double step = 1e-5, double floor = 1e-6);

}  // namespace persona::testing
