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

#include "bevmae/params.hpp"

namespace bevmae {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

struct OptimState {
  ParameterSet first_moment;
  ParameterSet second_moment;
  std::int64_t step = 0;

  static OptimState zeros_like(const ParameterSet& params);
};

// Bias-corrected Adam. Throws std::runtime_error naming the parameter when a
// gradient is not finite; parameters and state are left untouched then.
void adam_step(OptimState& state, ParameterSet& params, const ParameterSet& grads, double lr,
               const AdamConfig& config = {});

struct OneCycleConfig {
  double max_lr = 3e-4;
  double pct_start = 0.3;
  double div_factor = 25.0;         // initial lr = max_lr / div_factor
  double final_div_factor = 1e4;    // final lr = max_lr / final_div_factor

  bool operator==(const OneCycleConfig&) const = default;
};

// Cosine warmup from max_lr / div_factor to max_lr over the first
// pct_start * total_steps steps, then cosine annealing to max_lr / final_div_factor.
double one_cycle_lr(std::int64_t step, std::int64_t total_steps, const OneCycleConfig& config = {});

}  // namespace bevmae
