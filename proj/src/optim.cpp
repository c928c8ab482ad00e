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


#include "bevmae/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace bevmae {

OptimState OptimState::zeros_like(const ParameterSet& params) {
  return {params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(OptimState& state, ParameterSet& params, const ParameterSet& grads, double lr,
               const AdamConfig& config) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: parameter, gradient and moment sets differ");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params.entries()[k];
    const auto& g = grads.entries()[k];
    if (p.name != g.name || p.value.rows() != g.value.rows() || p.value.cols() != g.value.cols()) {
      throw std::invalid_argument("adam_step: gradient '" + g.name + "' does not match parameter '" + p.name + "'");
    }
    if (!g.value.allFinite()) throw std::runtime_error("adam_step: non-finite gradient for '" + g.name + "'");
  }

  ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& w = params.entries()[k].value;
    const Matrix& g = grads.entries()[k].value;
    Matrix& m = state.first_moment.entries()[k].value;
    Matrix& v = state.second_moment.entries()[k].value;
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
    w.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config.eps);
  }
}

double one_cycle_lr(std::int64_t step, std::int64_t total_steps, const OneCycleConfig& config) {
  if (total_steps < 1 || step < 0 || step > total_steps) {
    throw std::out_of_range("one_cycle_lr: step " + std::to_string(step) + " outside [0, " +
                            std::to_string(total_steps) + "]");
  }
  const auto cosine = [](double from, double to, double frac) {
    return to + 0.5 * (from - to) * (1.0 + std::cos(std::numbers::pi * frac));
  };
  const double initial = config.max_lr / config.div_factor;
  const double final_lr = config.max_lr / config.final_div_factor;
  const double peak = config.pct_start * static_cast<double>(total_steps);
  const double s = static_cast<double>(step);
  if (s <= peak) return peak > 0.0 ? cosine(initial, config.max_lr, s / peak) : config.max_lr;
  return cosine(config.max_lr, final_lr, (s - peak) / (static_cast<double>(total_steps) - peak));
}

}  // namespace bevmae
