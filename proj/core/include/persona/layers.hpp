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

#include "persona/autograd.hpp"

#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace persona {

/// Owns every Parameter of a model. Addresses stay stable for its lifetime,
/// so modules keep raw pointers into it.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  /// Registers a zero-initialized parameter. Names must be unique.
  Parameter& create(std::string name, Eigen::Index rows, Eigen::Index cols);
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grad();
  std::size_t scalar_count() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

/// Fills `p` with U(-scale, scale) draws from `rng`.
void init_uniform(Parameter& p, double scale, std::mt19937_64& rng);

enum class GateActivation { kLogistic, kTanh };

/// Applies the configured gate nonlinearity.
Var gate(Graph& g, Var x, GateActivation act);

/// Inverted dropout. A null generator or rate 0 means evaluation mode.
class Dropout {
 public:
  Dropout() = default;
  Dropout(double rate, std::mt19937_64* rng) : rate_(rate), rng_(rng) {}

  bool active() const { return rng_ != nullptr && rate_ > 0.0; }
  Var apply(Graph& g, Var x) const;

 private:
  double rate_ = 0.0;
  std::mt19937_64* rng_ = nullptr;
};

/// Gated recurrent unit:
///   z = sig(Wz x + Uz h + bz), r = sig(Wr x + Ur h + br)
///   n = tanh(Wn x + Un (r .* h) + bn), h' = (1 - z) .* n + z .* h
struct GruCell {
  Parameter* wz = nullptr;
  Parameter* wr = nullptr;
  Parameter* wn = nullptr;
  Parameter* uz = nullptr;
  Parameter* ur = nullptr;
  Parameter* un = nullptr;
  Parameter* bz = nullptr;
  Parameter* br = nullptr;
  Parameter* bn = nullptr;

  static GruCell create(ParameterSet& params, const std::string& prefix, Eigen::Index input,
                        Eigen::Index hidden);

  Eigen::Index hidden_size() const { return uz->value.rows(); }
  Eigen::Index input_size() const { return wz->value.cols(); }

  Var step(Graph& g, Var x, Var h) const;
  void init(std::mt19937_64& rng) const;
};

/// Additive attention pooling: e_j = v^T tanh(W h_j), output = sum softmax(e)_j h_j.
struct AttentionPool {
  Parameter* w = nullptr;  // [attn x d]
  Parameter* v = nullptr;  // [attn x 1]

  static AttentionPool create(ParameterSet& params, const std::string& prefix,
                              Eigen::Index dim, Eigen::Index attn_dim);

  struct Result {
    Var weights;  // [1 x k]
    Var pooled;   // [d x 1]
  };

  /// `states` is [d x k] with one column per position.
  Result pool(Graph& g, Var states, std::span<const std::uint8_t> mask = {}) const;
  void init(std::mt19937_64& rng) const;
};

}  // namespace persona
