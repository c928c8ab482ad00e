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


#include "bevmae/masking.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bevmae/random.hpp"

namespace bevmae {

std::size_t masked_grid_count(std::size_t n_nonempty, double ratio) {
  auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n_nonempty) + 0.5));
  if (n_nonempty >= 2) k = std::clamp<std::size_t>(k, 1, n_nonempty - 1);
  return std::min(k, n_nonempty);
}

MaskPlan plan_mask(const Occupancy& occupancy, double ratio, std::uint64_t seed) {
  if (occupancy.grids.empty()) throw std::invalid_argument("plan_mask: no non-empty BEV grids");
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("plan_mask: ratio must lie in (0, 1)");

  std::vector<GridIndex> grids;
  grids.reserve(occupancy.grids.size());
  for (const auto& [g, ordinals] : occupancy.grids) grids.push_back(g);

  const std::size_t n = grids.size();
  const std::size_t k = masked_grid_count(n, ratio);
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(grids[i], grids[j]);
  }

  MaskPlan plan;
  plan.ratio = ratio;
  plan.seed = seed;
  plan.masked.insert(grids.begin(), grids.begin() + static_cast<std::ptrdiff_t>(k));
  plan.visible.insert(grids.begin() + static_cast<std::ptrdiff_t>(k), grids.end());
  return plan;
}

std::size_t CloudSplit::masked_point_count() const {
  std::size_t n = 0;
  for (const auto& [g, pts] : masked_points_by_grid) n += pts.size();
  return n;
}

CloudSplit split_cloud(const PointCloud& cloud, const Occupancy& occupancy, const MaskPlan& plan) {
  for (const GridIndex& g : plan.masked) {
    if (!occupancy.grids.count(g)) throw std::invalid_argument("split_cloud: masked grid absent from occupancy");
  }
  for (const GridIndex& g : plan.visible) {
    if (!occupancy.grids.count(g)) throw std::invalid_argument("split_cloud: visible grid absent from occupancy");
  }

  // Route by ordinal so both sides keep input order.
  std::vector<signed char> masked_flag(cloud.points.size(), -1);
  for (const auto& [g, ordinals] : occupancy.grids) {
    const bool m = plan.is_masked(g);
    if (!m && !plan.visible.count(g)) throw std::invalid_argument("split_cloud: grid in neither mask set");
    for (std::size_t k : ordinals) {
      if (k >= cloud.points.size()) throw std::invalid_argument("split_cloud: occupancy does not match cloud");
      masked_flag[k] = m ? 1 : 0;
    }
  }

  CloudSplit split;
  split.visible_points.frame_id = cloud.frame_id;
  for (std::size_t k = 0; k < cloud.points.size(); ++k) {
    if (masked_flag[k] == 0) split.visible_points.points.push_back(cloud.points[k]);
  }
  for (const GridIndex& g : plan.masked) {
    auto& dst = split.masked_points_by_grid[g];
    for (std::size_t k : occupancy.grids.at(g)) dst.push_back(cloud.points[k]);
  }
  return split;
}

}  // namespace bevmae
