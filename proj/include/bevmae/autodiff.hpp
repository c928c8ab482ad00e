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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "bevmae/tensor.hpp"

namespace bevmae {

class Tape;

// Discrete decisions of every branching op, one vector per op call in
// evaluation order.
struct BranchLog {
  std::vector<std::vector<std::int64_t>> ops;
};

// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so insertion
// order is a topological order and backward() walks it in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Matrix value);
  Var constant(Matrix value);
  // Registers an op result. `backward` receives d(loss)/d(result) and adds
  // into the inputs' gradient slots; it is dropped when no input needs grad.
  Var record(Matrix value, std::span<const Var> inputs, BackwardFn backward);

  const Matrix& value(const Var& v) const { return nodes_[v.id()].value; }
  bool requires_grad(const Var& v) const { return nodes_[v.id()].requires_grad; }

  // Gradient of the last backward() target w.r.t. `v` (zeros if unreached).
  Matrix grad(const Var& v) const;
  // Zero-initialised accumulation slot used by op backward functions.
  Matrix& grad_slot(const Var& v);

  // Throws std::invalid_argument unless `loss` is 1x1.
  void backward(const Var& loss);

  // Discrete branch decisions (ReLU signs, nearest-neighbour choices) taken by
  // the ops so far, folded into one hash. Equal signatures between two
  // evaluations mean the same smooth piece of the function was evaluated.
  std::uint64_t branch_signature() const { return branch_hash_; }

  // Branching ops route their natural decisions through decide(). With a
  // record log attached the decisions are appended to it; with a replay log
  // the stored decisions are returned instead, which pins the evaluation to
  // the recorded smooth piece.
  std::vector<std::int64_t> decide(std::vector<std::int64_t> natural);
  void record_branches(BranchLog* log) { record_ = log; }
  void replay_branches(const BranchLog* log) {
    replay_ = log;
    replay_cursor_ = 0;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  std::uint64_t branch_hash_ = 0xcbf29ce484222325ULL;
  BranchLog* record_ = nullptr;
  const BranchLog* replay_ = nullptr;
  std::size_t replay_cursor_ = 0;
};

// Dense ops.
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var mul(const Var& a, const Var& b);  // elementwise
Var add_row_bias(const Var& a, const Var& bias);  // bias is 1 x cols
Var relu(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
Var gather_rows(const Var& a, std::vector<std::size_t> rows);

}  // namespace bevmae
