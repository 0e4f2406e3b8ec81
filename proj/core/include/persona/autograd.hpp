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

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace persona {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A named, trainable array. Gradients are accumulated by Graph::backward.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Handle to a node of a Graph. Only meaningful for the graph that made it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode differentiation tape over dense double matrices.
///
/// Column vectors are [n x 1] matrices. Every op records its value eagerly;
/// when the graph is built with `record_backward = false` no closures are
/// stored and backward() is unavailable (inference mode).
///
/// Masks are per-entry flags in column-major order of the input: 1 = live,
/// 0 = excluded. Masked softmax entries come out exactly 0.
class Graph {
 public:
  explicit Graph(bool record_backward = true) : record_(record_backward) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool records_backward() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  /// Gradient of the last backward() seed w.r.t. this node (empty if none).
  const Matrix& grad(Var v) const { return nodes_.at(v.id).grad; }

  Var constant(Matrix value);
  Var param(Parameter& p);
  /// Row `row` of an embedding table, returned as a column vector.
  Var lookup(Parameter& table, int row);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var cmul(Var a, Var b);
  /// m + col * 1^T
  Var add_col(Var m, Var col);
  /// m .* (col * 1^T)
  Var cmul_col(Var m, Var col);
  /// scale * a + shift
  Var affine(Var a, double scale, double shift);
  /// Elementwise product with a constant array (dropout masks).
  Var mask_mul(Var a, const Matrix& mask);

  Var tanh(Var a);
  Var sigmoid(Var a);

  /// Vertical concatenation (row counts add, column counts must agree).
  Var vconcat(Var a, Var b);
  /// Columns side by side; every input must have the same row count.
  Var hstack(std::span<const Var> cols);
  Var column(Var m, int j);
  Var transpose(Var a);

  /// Softmax over all entries of `a` restricted to `mask` (empty = all live).
  Var softmax(Var a, std::span<const std::uint8_t> mask = {});
  Var log_softmax(Var a, std::span<const std::uint8_t> mask = {});
  /// Scalar [1 x 1] holding entry `index` (column-major) of `a`.
  Var pick(Var a, int index);
  /// Per-row maximum across columns; gradient flows to the first argmax.
  Var row_max(Var m);
  /// Sum of all entries, [1 x 1].
  Var sum(Var a);
  Var add_n(std::span<const Var> terms);

  /// Seeds d(out)/d(out) = 1 for a [1 x 1] node and accumulates parameter
  /// gradients into Parameter::grad. Throws if backward was not recorded.
  void backward(Var out);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Graph&, const Matrix&)> back;
  };

  Var push(Matrix value, std::function<void(Graph&, const Matrix&)> back);
  void accumulate(Var target, const Matrix& g);
  const Node& node(Var v) const;

  bool record_;
  std::vector<Node> nodes_;
};

}  // namespace persona
