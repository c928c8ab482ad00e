// Copyright 2026 The bevmae Authors
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

#include "bevmae/autodiff.hpp"

#include <stdexcept>
#include <string>

namespace bevmae {

const Matrix& Var::value() const { return tape_->value(*this); }

Var Tape::leaf(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), true, false, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), false, false, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::span<const Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (const Var& in : inputs) {
    if (&in.tape() != this) throw std::invalid_argument("Tape::record: input from another tape");
    needs = needs || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Matrix(), needs, false, needs ? std::move(backward) : nullptr});
  return Var(this, nodes_.size() - 1);
}

Matrix Tape::grad(const Var& v) const {
  const Node& n = nodes_[v.id()];
  if (!n.has_grad) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Matrix& Tape::grad_slot(const Var& v) {
  Node& n = nodes_[v.id()];
  if (!n.has_grad) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::backward(const Var& loss) {
  const Node& root = nodes_[loss.id()];
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got " +
                                std::to_string(root.value.rows()) + "x" +
                                std::to_string(root.value.cols()));
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  grad_slot(loss)(0, 0) = 1.0;
  for (std::size_t k = loss.id() + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (!n.has_grad || !n.backward) continue;
    // Closures only write into earlier nodes; no reallocation happens here.
    n.backward(n.grad);
  }
}

std::vector<std::int64_t> Tape::decide(std::vector<std::int64_t> natural) {
  std::uint64_t h = natural.size();
  for (std::int64_t d : natural) h = h * 1000003 + static_cast<std::uint64_t>(d);
  branch_hash_ ^= h + 0x9E3779B97F4A7C15ULL + (branch_hash_ << 6) + (branch_hash_ >> 2);
  if (replay_ != nullptr) {
    if (replay_cursor_ >= replay_->ops.size() || replay_->ops[replay_cursor_].size() != natural.size()) {
      throw std::logic_error("Tape::decide: replayed branch log does not match this evaluation");
    }
    return replay_->ops[replay_cursor_++];
  }
  if (record_ != nullptr) record_->ops.push_back(natural);
  return natural;
}

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  Tape& t = a.tape();
  Matrix out = a.value() * b.value();
  const Var inputs[] = {a, b};
  return t.record(std::move(out), inputs, [&t, a, b](const Matrix& g) {
    if (t.requires_grad(a)) t.grad_slot(a).noalias() += g * b.value().transpose();
    if (t.requires_grad(b)) t.grad_slot(b).noalias() += a.value().transpose() * g;
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tape& t = a.tape();
  Matrix out = a.value() + b.value();
  const Var inputs[] = {a, b};
  return t.record(std::move(out), inputs, [&t, a, b](const Matrix& g) {
    if (t.requires_grad(a)) t.grad_slot(a) += g;
    if (t.requires_grad(b)) t.grad_slot(b) += g;
  });
}

Var scale(const Var& a, double s) {
  Tape& t = a.tape();
  Matrix out = a.value() * s;
  const Var inputs[] = {a};
  return t.record(std::move(out), inputs, [&t, a, s](const Matrix& g) { t.grad_slot(a) += g * s; });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tape& t = a.tape();
  Matrix out = a.value().cwiseProduct(b.value());
  const Var inputs[] = {a, b};
  return t.record(std::move(out), inputs, [&t, a, b](const Matrix& g) {
    if (t.requires_grad(a)) t.grad_slot(a) += g.cwiseProduct(b.value());
    if (t.requires_grad(b)) t.grad_slot(b) += g.cwiseProduct(a.value());
  });
}

Var add_row_bias(const Var& a, const Var& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    throw std::invalid_argument("add_row_bias: bias must be 1 x cols");
  }
  Tape& t = a.tape();
  Matrix out = a.value();
  out.rowwise() += bias.value().row(0);
  const Var inputs[] = {a, bias};
  return t.record(std::move(out), inputs, [&t, a, bias](const Matrix& g) {
    if (t.requires_grad(a)) t.grad_slot(a) += g;
    if (t.requires_grad(bias)) t.grad_slot(bias) += g.colwise().sum();
  });
}

Var relu(const Var& a) {
  Tape& t = a.tape();
  const Matrix& x = a.value();
  std::vector<std::int64_t> open(static_cast<std::size_t>(x.size()));
  for (Eigen::Index k = 0; k < x.size(); ++k) open[static_cast<std::size_t>(k)] = x.data()[k] > 0.0 ? 1 : 0;
  open = t.decide(std::move(open));
  // Subgradient 0 at the kink.
  Matrix mask(x.rows(), x.cols());
  for (Eigen::Index k = 0; k < x.size(); ++k) mask.data()[k] = static_cast<double>(open[static_cast<std::size_t>(k)]);
  Matrix out = (mask.array() > 0.0).select(x, 0.0);
  const Var inputs[] = {a};
  return t.record(std::move(out), inputs, [&t, a, mask = std::move(mask)](const Matrix& g) {
    t.grad_slot(a) += (mask.array() > 0.0).select(g, 0.0);
  });
}

Var sum(const Var& a) {
  Tape& t = a.tape();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const Var inputs[] = {a};
  return t.record(std::move(out), inputs, [&t, a](const Matrix& g) { t.grad_slot(a).array() += g(0, 0); });
}

Var mean(const Var& a) {
  if (a.value().size() == 0) throw std::invalid_argument("mean: empty input");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var gather_rows(const Var& a, std::vector<std::size_t> rows) {
  Tape& t = a.tape();
  const Matrix& x = a.value();
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= static_cast<std::size_t>(x.rows())) throw std::out_of_range("gather_rows: row index");
    out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(rows[r]));
  }
  const Var inputs[] = {a};
  return t.record(std::move(out), inputs, [&t, a, rows = std::move(rows)](const Matrix& g) {
    Matrix& slot = t.grad_slot(a);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      slot.row(static_cast<Eigen::Index>(rows[r])) += g.row(static_cast<Eigen::Index>(r));
    }
  });
}

}  // namespace bevmae
