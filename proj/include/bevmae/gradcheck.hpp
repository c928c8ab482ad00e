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

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bevmae/params.hpp"

namespace bevmae {

struct Evaluation {
  double value = 0.0;
  // Tape::branch_signature() of the evaluation, or 0 for smooth functions.
  std::uint64_t branch_signature = 0;
};

using ObjectiveFn = std::function<Evaluation(const ParameterSet&)>;
// The same objective with every branch decision pinned to the base point.
using FrozenObjectiveFn = std::function<double(const ParameterSet&)>;

struct GradCheckOptions {
  double step = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, denominator_floor).
  double denominator_floor = 1e-6;
  // 0 checks every component; otherwise a seeded random subset per tensor.
  std::size_t max_components = 0;
  std::uint64_t seed = 0;
};

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // at worst_index
  double numeric = 0.0;
  std::size_t checked = 0;
  // Checked components whose +-step evaluations crossed a kink and were
  // differenced on the frozen objective instead.
  std::size_t frozen = 0;
  // Kink-crossing components with no frozen objective available; another
  // sample is drawn in their place.
  std::size_t skipped = 0;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;  // worst first

  double max_rel_error() const;
  bool passed(double tolerance) const;
  std::string to_string() const;
};

double central_difference(const ObjectiveFn& f, ParameterSet& params, std::size_t entry, Eigen::Index index,
                          double step);

// Compares `analytic` with central differences of `f` around `params`.
// `params` is restored before returning.
GradCheckReport grad_check(const ObjectiveFn& f, ParameterSet& params, const ParameterSet& analytic,
                           const GradCheckOptions& options = {}, const FrozenObjectiveFn& frozen = {});

}  // namespace bevmae
