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


#include "bevmae/params.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

namespace bevmae {

Matrix& ParameterSet::add(std::string name, Matrix value) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  entries_.push_back({std::move(name), std::move(value)});
  return entries_.back().value;
}

bool ParameterSet::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Parameter& p) { return p.name == name; });
}

Matrix& ParameterSet::at(std::string_view name) {
  return const_cast<Matrix&>(std::as_const(*this).at(name));
}

const Matrix& ParameterSet::at(std::string_view name) const {
  for (const Parameter& p : entries_) {
    if (p.name == name) return p.value;
  }
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const Parameter& p : entries_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (const Parameter& p : entries_) out.add(p.name, Matrix::Zero(p.value.rows(), p.value.cols()));
  return out;
}

bool ParameterSet::operator==(const ParameterSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    const auto& a = entries_[k];
    const auto& b = other.entries_[k];
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols()) return false;
    if (a.value != b.value) return false;
  }
  return true;
}

BoundParams::BoundParams(Tape& tape, const ParameterSet& params) : tape_(&tape) {
  for (const Parameter& p : params.entries()) vars_.emplace(p.name, tape.leaf(p.value));
}

const Var& BoundParams::operator[](std::string_view name) const {
  const auto it = vars_.find(name);
  if (it == vars_.end()) throw std::out_of_range("no bound parameter named '" + std::string(name) + "'");
  return it->second;
}

ParameterSet BoundParams::gradients(const ParameterSet& like) const {
  ParameterSet out;
  for (const Parameter& p : like.entries()) out.add(p.name, tape_->grad((*this)[p.name]));
  return out;
}

}  // namespace bevmae
