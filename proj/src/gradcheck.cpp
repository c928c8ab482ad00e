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


#include "bevmae/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "bevmae/random.hpp"

namespace bevmae {

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& p : params) worst = std::max(worst, p.max_rel_error);
  return worst;
}

bool GradCheckReport::passed(double tolerance) const {
  return std::all_of(params.begin(), params.end(),
                     [tolerance](const ParamCheck& p) { return p.checked > 0 && p.max_rel_error < tolerance; });
}

std::string GradCheckReport::to_string() const {
  std::ostringstream out;
  out << std::left << std::setw(26) << "parameter" << std::right << std::setw(12) << "max_rel_err" << std::setw(9)
      << "checked" << std::setw(8) << "frozen" << std::setw(9) << "skipped" << std::setw(16) << "analytic" << std::setw(16) << "numeric" << '\n';
  for (const auto& p : params) {
    out << std::left << std::setw(26) << p.name << std::right << std::scientific << std::setprecision(3)
        << std::setw(12) << p.max_rel_error << std::setw(9) << p.checked << std::setw(8) << p.frozen << std::setw(9) << p.skipped
        << std::setprecision(6) << std::setw(16) << p.analytic << std::setw(16) << p.numeric << '\n'
        << std::defaultfloat;
  }
  return out.str();
}

double central_difference(const ObjectiveFn& f, ParameterSet& params, std::size_t entry, Eigen::Index index,
                          double step) {
  double& x = params.entries()[entry].value.data()[index];
  const double saved = x;
  x = saved + step;
  const double up = f(params).value;
  x = saved - step;
  const double down = f(params).value;
  x = saved;
  return (up - down) / (2.0 * step);
}

GradCheckReport grad_check(const ObjectiveFn& f, ParameterSet& params, const ParameterSet& analytic,
                           const GradCheckOptions& options, const FrozenObjectiveFn& frozen) {
  if (params.size() != analytic.size()) throw std::invalid_argument("grad_check: analytic gradient set mismatch");
  const std::uint64_t base_signature = f(params).branch_signature;
  SplitMix64 rng(options.seed);
  GradCheckReport report;

  for (std::size_t e = 0; e < params.size(); ++e) {
    Parameter& p = params.entries()[e];
    const Matrix& a = analytic.entries()[e].value;
    if (a.rows() != p.value.rows() || a.cols() != p.value.cols()) {
      throw std::invalid_argument("grad_check: shape mismatch for '" + p.name + "'");
    }
    const auto n = static_cast<std::size_t>(p.value.size());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const bool sampled = options.max_components != 0 && options.max_components < n;
    if (sampled) {
      for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
    }
    const std::size_t wanted = sampled ? options.max_components : n;

    ParamCheck check;
    check.name = p.name;
    for (std::size_t idx : order) {
      if (check.checked == wanted) break;
      const auto index = static_cast<Eigen::Index>(idx);
      double& x = p.value.data()[index];
      const double saved = x;
      x = saved + options.step;
      const Evaluation up = f(params);
      x = saved - options.step;
      const Evaluation down = f(params);
      double numeric = (up.value - down.value) / (2.0 * options.step);
      if (up.branch_signature != base_signature || down.branch_signature != base_signature) {
        if (!frozen) {
          x = saved;
          ++check.skipped;
          continue;
        }
        x = saved + options.step;
        const double fup = frozen(params);
        x = saved - options.step;
        const double fdown = frozen(params);
        numeric = (fup - fdown) / (2.0 * options.step);
        ++check.frozen;
      }
      x = saved;
      const double an = a.data()[index];
      const double denom = std::max({std::abs(an), std::abs(numeric), options.denominator_floor});
      const double rel = std::abs(an - numeric) / denom;
      if (check.checked == 0 || rel > check.max_rel_error) {
        check.max_rel_error = rel;
        check.worst_index = idx;
        check.analytic = an;
        check.numeric = numeric;
      }
      ++check.checked;
    }
    report.params.push_back(std::move(check));
  }
  std::stable_sort(report.params.begin(), report.params.end(),
                   [](const ParamCheck& l, const ParamCheck& r) { return l.max_rel_error > r.max_rel_error; });
  return report;
}

}  // namespace bevmae
