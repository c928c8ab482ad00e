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
#include <map>
#include <set>
#include <vector>

#include "bevmae/geometry.hpp"

namespace bevmae {

struct MaskPlan {
  std::set<GridIndex> masked;
  std::set<GridIndex> visible;
  double ratio = 0.7;
  std::uint64_t seed = 0;

  bool is_masked(GridIndex g) const { return masked.count(g) != 0; }
  bool operator==(const MaskPlan&) const = default;
};

// Number of grids to mask among n non-empty ones: round-half-up of ratio * n,
// clamped to [1, n - 1] when n >= 2.
std::size_t masked_grid_count(std::size_t n_nonempty, double ratio);

// Uniform sample without replacement over the non-empty grids, taken as the
// prefix of a Fisher-Yates shuffle of the lexicographically sorted grid list.
MaskPlan plan_mask(const Occupancy& occupancy, double ratio, std::uint64_t seed);

struct CloudSplit {
  PointCloud visible_points;
  std::map<GridIndex, std::vector<Point>> masked_points_by_grid;

  std::size_t masked_point_count() const;
};

CloudSplit split_cloud(const PointCloud& cloud, const Occupancy& occupancy, const MaskPlan& plan);

}  // namespace bevmae
