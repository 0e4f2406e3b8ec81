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

#include "persona/autograd.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace persona {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

bool live(std::span<const std::uint8_t> mask, Eigen::Index i) {
  return mask.empty() || mask[static_cast<std::size_t>(i)] != 0;
}

}  // namespace

const Graph::Node& Graph::node(Var v) const {
  require(v.id >= 0 && static_cast<std::size_t>(v.id) < nodes_.size(),
          "graph: invalid variable handle");
  return nodes_[static_cast<std::size_t>(v.id)];
}

Var Graph::push(Matrix value, std::function<void(Graph&, const Matrix&)> back) {
  Node n;
  n.value = std::move(value);
  if (record_) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Graph::accumulate(Var target, const Matrix& g) {
  Matrix& dst = nodes_[static_cast<std::size_t>(target.id)].grad;
  if (dst.size() == 0) {
    dst = g;
  } else {
    dst += g;
  }
}

Var Graph::constant(Matrix value) { return push(std::move(value), nullptr); }

Var Graph::param(Parameter& p) {
  if (record_ && (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())) {
    p.zero_grad();
  }
  Parameter* target = &p;
  return push(p.value, [target](Graph&, const Matrix& g) { target->grad += g; });
}

Var Graph::lookup(Parameter& table, int row) {
  require(row >= 0 && row < table.value.rows(), "lookup: row out of range");
  if (record_ && (table.grad.rows() != table.value.rows() ||
                  table.grad.cols() != table.value.cols())) {
    table.zero_grad();
  }
  Parameter* target = &table;
  return push(table.value.row(row).transpose(), [target, row](Graph&, const Matrix& g) {
    target->grad.row(row) += g.transpose();
  });
}

Var Graph::matmul(Var a, Var b) {
  const Matrix& av = node(a).value;
  const Matrix& bv = node(b).value;
  require(av.cols() == bv.rows(), "matmul: inner dimensions differ");
  return push(av * bv, [a, b](Graph& gr, const Matrix& g) {
    gr.accumulate(a, g * gr.value(b).transpose());
    gr.accumulate(b, gr.value(a).transpose() * g);
  });
}

Var Graph::add(Var a, Var b) {
  const Matrix& av = node(a).value;
  const Matrix& bv = node(b).value;
  require(av.rows() == bv.rows() && av.cols() == bv.cols(), "add: shape mismatch");
  return push(av + bv, [a, b](Graph& gr, const Matrix& g) {
    gr.accumulate(a, g);
    gr.accumulate(b, g);
  });
}

Var Graph::sub(Var a, Var b) {
  const Matrix& av = node(a).value;
  const Matrix& bv = node(b).value;
  require(av.rows() == bv.rows() && av.cols() == bv.cols(), "sub: shape mismatch");
  return push(av - bv, [a, b](Graph& gr, const Matrix& g) {
    gr.accumulate(a, g);
    gr.accumulate(b, -g);
  });
}

Var Graph::cmul(Var a, Var b) {
  const Matrix& av = node(a).value;
  const Matrix& bv = node(b).value;
  require(av.rows() == bv.rows() && av.cols() == bv.cols(), "cmul: shape mismatch");
  return push(av.cwiseProduct(bv), [a, b](Graph& gr, const Matrix& g) {
    gr.accumulate(a, g.cwiseProduct(gr.value(b)));
    gr.accumulate(b, g.cwiseProduct(gr.value(a)));
  });
}

Var Graph::add_col(Var m, Var col) {
  const Matrix& mv = node(m).value;
  const Matrix& cv = node(col).value;
  require(cv.cols() == 1 && cv.rows() == mv.rows(), "add_col: shape mismatch");
  Matrix out = mv.colwise() + cv.col(0);
  return push(std::move(out), [m, col](Graph& gr, const Matrix& g) {
    gr.accumulate(m, g);
    gr.accumulate(col, g.rowwise().sum());
  });
}

Var Graph::cmul_col(Var m, Var col) {
  const Matrix& mv = node(m).value;
  const Matrix& cv = node(col).value;
  require(cv.cols() == 1 && cv.rows() == mv.rows(), "cmul_col: shape mismatch");
  Matrix out = mv.array().colwise() * cv.col(0).array();
  return push(std::move(out), [m, col](Graph& gr, const Matrix& g) {
    gr.accumulate(m, g.array().colwise() * gr.value(col).col(0).array());
    gr.accumulate(col, g.cwiseProduct(gr.value(m)).rowwise().sum());
  });
}

Var Graph::affine(Var a, double scale, double shift) {
  Matrix out = (node(a).value.array() * scale + shift).matrix();
  return push(std::move(out),
              [a, scale](Graph& gr, const Matrix& g) { gr.accumulate(a, g * scale); });
}

Var Graph::mask_mul(Var a, const Matrix& mask) {
  const Matrix& av = node(a).value;
  require(av.rows() == mask.rows() && av.cols() == mask.cols(), "mask_mul: shape mismatch");
  return push(av.cwiseProduct(mask), [a, mask](Graph& gr, const Matrix& g) {
    gr.accumulate(a, g.cwiseProduct(mask));
  });
}

Var Graph::tanh(Var a) {
  Matrix out = node(a).value.array().tanh().matrix();
  Var self{static_cast<int>(nodes_.size())};
  return push(std::move(out), [a, self](Graph& gr, const Matrix& g) {
    const Matrix& y = gr.value(self);
    gr.accumulate(a, (g.array() * (1.0 - y.array().square())).matrix());
  });
}

Var Graph::sigmoid(Var a) {
  Matrix out = (1.0 / (1.0 + (-node(a).value.array()).exp())).matrix();
  Var self{static_cast<int>(nodes_.size())};
  return push(std::move(out), [a, self](Graph& gr, const Matrix& g) {
    const Matrix& y = gr.value(self);
    gr.accumulate(a, (g.array() * y.array() * (1.0 - y.array())).matrix());
  });
}

Var Graph::vconcat(Var a, Var b) {
  const Matrix& av = node(a).value;
  const Matrix& bv = node(b).value;
  require(av.cols() == bv.cols(), "vconcat: column counts differ");
  Matrix out(av.rows() + bv.rows(), av.cols());
  out << av, bv;
  const Eigen::Index top = av.rows();
  const Eigen::Index bottom = bv.rows();
  return push(std::move(out), [a, b, top, bottom](Graph& gr, const Matrix& g) {
    gr.accumulate(a, g.topRows(top));
    gr.accumulate(b, g.bottomRows(bottom));
  });
}

Var Graph::hstack(std::span<const Var> cols) {
  require(!cols.empty(), "hstack: no inputs");
  const Eigen::Index rows = node(cols.front()).value.rows();
  Eigen::Index total = 0;
  for (Var c : cols) {
    require(node(c).value.rows() == rows, "hstack: row counts differ");
    total += node(c).value.cols();
  }
  Matrix out(rows, total);
  Eigen::Index at = 0;
  for (Var c : cols) {
    const Matrix& cv = node(c).value;
    out.middleCols(at, cv.cols()) = cv;
    at += cv.cols();
  }
  std::vector<Var> inputs(cols.begin(), cols.end());
  return push(std::move(out), [inputs](Graph& gr, const Matrix& g) {
    Eigen::Index offset = 0;
    for (Var c : inputs) {
      const Eigen::Index w = gr.value(c).cols();
      gr.accumulate(c, g.middleCols(offset, w));
      offset += w;
    }
  });
}

Var Graph::column(Var m, int j) {
  const Matrix& mv = node(m).value;
  require(j >= 0 && j < mv.cols(), "column: index out of range");
  const Eigen::Index rows = mv.rows();
  const Eigen::Index cols = mv.cols();
  return push(mv.col(j), [m, j, rows, cols](Graph& gr, const Matrix& g) {
    Matrix full = Matrix::Zero(rows, cols);
    full.col(j) = g;
    gr.accumulate(m, full);
  });
}

Var Graph::transpose(Var a) {
  return push(node(a).value.transpose(),
              [a](Graph& gr, const Matrix& g) { gr.accumulate(a, g.transpose()); });
}

Var Graph::softmax(Var a, std::span<const std::uint8_t> mask) {
  const Matrix& av = node(a).value;
  require(mask.empty() || mask.size() == static_cast<std::size_t>(av.size()),
          "softmax: mask size mismatch");
  double hi = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < av.size(); ++i) {
    if (live(mask, i)) hi = std::max(hi, av(i));
  }
  require(std::isfinite(hi), "softmax: every position is masked");
  Matrix out = Matrix::Zero(av.rows(), av.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < av.size(); ++i) {
    if (live(mask, i)) {
      out(i) = std::exp(av(i) - hi);
      total += out(i);
    }
  }
  out /= total;
  Var self{static_cast<int>(nodes_.size())};
  return push(std::move(out), [a, self](Graph& gr, const Matrix& g) {
    const Matrix& y = gr.value(self);
    const double dot = g.cwiseProduct(y).sum();
    gr.accumulate(a, (y.array() * (g.array() - dot)).matrix());
  });
}

Var Graph::log_softmax(Var a, std::span<const std::uint8_t> mask) {
  const Matrix& av = node(a).value;
  require(mask.empty() || mask.size() == static_cast<std::size_t>(av.size()),
          "log_softmax: mask size mismatch");
  double hi = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < av.size(); ++i) {
    if (live(mask, i)) hi = std::max(hi, av(i));
  }
  require(std::isfinite(hi), "log_softmax: every position is masked");
  double total = 0.0;
  for (Eigen::Index i = 0; i < av.size(); ++i) {
    if (live(mask, i)) total += std::exp(av(i) - hi);
  }
  const double log_z = hi + std::log(total);
  Matrix out(av.rows(), av.cols());
  std::vector<std::uint8_t> keep(mask.begin(), mask.end());
  for (Eigen::Index i = 0; i < av.size(); ++i) {
    out(i) = live(mask, i) ? av(i) - log_z : -std::numeric_limits<double>::infinity();
  }
  Var self{static_cast<int>(nodes_.size())};
  return push(std::move(out), [a, self, keep](Graph& gr, const Matrix& g) {
    const Matrix& y = gr.value(self);
    double gsum = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (live(keep, i)) gsum += g(i);
    }
    Matrix da = Matrix::Zero(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (live(keep, i)) da(i) = g(i) - std::exp(y(i)) * gsum;
    }
    gr.accumulate(a, da);
  });
}

Var Graph::pick(Var a, int index) {
  const Matrix& av = node(a).value;
  require(index >= 0 && index < av.size(), "pick: index out of range");
  Matrix out(1, 1);
  out(0, 0) = av(index);
  const Eigen::Index rows = av.rows();
  const Eigen::Index cols = av.cols();
  return push(std::move(out), [a, index, rows, cols](Graph& gr, const Matrix& g) {
    Matrix full = Matrix::Zero(rows, cols);
    full(index) = g(0, 0);
    gr.accumulate(a, full);
  });
}

Var Graph::row_max(Var m) {
  const Matrix& mv = node(m).value;
  require(mv.cols() >= 1, "row_max: empty matrix");
  Matrix out(mv.rows(), 1);
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(mv.rows()));
  for (Eigen::Index r = 0; r < mv.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < mv.cols(); ++c) {
      if (mv(r, c) > mv(r, best)) best = c;
    }
    arg[static_cast<std::size_t>(r)] = best;
    out(r, 0) = mv(r, best);
  }
  const Eigen::Index cols = mv.cols();
  return push(std::move(out), [m, arg, cols](Graph& gr, const Matrix& g) {
    Matrix full = Matrix::Zero(g.rows(), cols);
    for (Eigen::Index r = 0; r < g.rows(); ++r) full(r, arg[static_cast<std::size_t>(r)]) = g(r, 0);
    gr.accumulate(m, full);
  });
}

Var Graph::sum(Var a) {
  const Matrix& av = node(a).value;
  Matrix out(1, 1);
  out(0, 0) = av.sum();
  const Eigen::Index rows = av.rows();
  const Eigen::Index cols = av.cols();
  return push(std::move(out), [a, rows, cols](Graph& gr, const Matrix& g) {
    gr.accumulate(a, Matrix::Constant(rows, cols, g(0, 0)));
  });
}

Var Graph::add_n(std::span<const Var> terms) {
  require(!terms.empty(), "add_n: no inputs");
  Matrix out = node(terms.front()).value;
  for (std::size_t i = 1; i < terms.size(); ++i) {
    const Matrix& tv = node(terms[i]).value;
    require(tv.rows() == out.rows() && tv.cols() == out.cols(), "add_n: shape mismatch");
    out += tv;
  }
  std::vector<Var> inputs(terms.begin(), terms.end());
  return push(std::move(out), [inputs](Graph& gr, const Matrix& g) {
    for (Var t : inputs) gr.accumulate(t, g);
  });
}

void Graph::backward(Var out) {
  if (!record_) throw std::logic_error("graph: backward on an inference-only graph");
  const Matrix& ov = node(out).value;
  require(ov.rows() == 1 && ov.cols() == 1, "backward: output must be a scalar");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  nodes_[static_cast<std::size_t>(out.id)].grad = Matrix::Ones(1, 1);
  for (int i = out.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.size() == 0 || !n.back) continue;
    n.back(*this, n.grad);
  }
}

}  // namespace persona
