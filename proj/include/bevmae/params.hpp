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
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "bevmae/autodiff.hpp"
#include "bevmae/tensor.hpp"

namespace bevmae {

struct Parameter {
  std::string name;
  Matrix value;
};

// Named parameter tensors in insertion order. Also used for gradients and
// optimizer moments, which share names and shapes with the parameters.
class ParameterSet {
 public:
  Matrix& add(std::string name, Matrix value);
  bool contains(std::string_view name) const;
  Matrix& at(std::string_view name);
  const Matrix& at(std::string_view name) const;

  std::vector<Parameter>& entries() { return entries_; }
  const std::vector<Parameter>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  // Same names and shapes, all zeros.
  ParameterSet zeros_like() const;

  bool operator==(const ParameterSet& other) const;

 private:
  std::vector<Parameter> entries_;
};

// Parameters placed on a tape as differentiable leaves.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ParameterSet& params);

  const Var& operator[](std::string_view name) const;
  // d(loss)/d(param) for every parameter after tape.backward().
  ParameterSet gradients(const ParameterSet& like) const;

 private:
  Tape* tape_;
  std::map<std::string, Var, std::less<>> vars_;
};

}  // namespace bevmae
