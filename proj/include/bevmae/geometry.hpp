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

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bevmae/tensor.hpp"

namespace bevmae {

struct Point {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;

  bool operator==(const Point&) const = default;
};

struct PointCloud {
  std::vector<Point> points;
  std::string frame_id;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

// Index into the X x Y bird's-eye-view plane. Ordered lexicographically (i, then j).
struct GridIndex {
  std::int32_t i = 0;
  std::int32_t j = 0;

  auto operator<=>(const GridIndex&) const = default;
};

struct VoxelIndex {
  std::int32_t ix = 0;
  std::int32_t iy = 0;
  std::int32_t iz = 0;

  auto operator<=>(const VoxelIndex&) const = default;
};

// Metric ranges, voxel size and BEV downsample ratio. Binning is half-open
// [lo, hi) on every axis with the origin at the range minimum.
struct GridSpec {
  double x_min = -22.4, x_max = 22.4;
  double y_min = -22.4, y_max = 22.4;
  double z_min = -2.0, z_max = -0.2;
  std::array<double, 3> voxel_size{0.1, 0.1, 0.15};
  int downsample = 8;

  // Throws std::invalid_argument when ranges are degenerate or do not tile.
  void validate() const;

  int voxels_x() const;
  int voxels_y() const;
  int voxels_z() const;
  // X and Y of the BEV plane.
  int grids_x() const { return voxels_x() / downsample; }
  int grids_y() const { return voxels_y() / downsample; }

  double grid_edge_x() const { return downsample * voxel_size[0]; }
  double grid_edge_y() const { return downsample * voxel_size[1]; }
  double voxel_volume() const { return voxel_size[0] * voxel_size[1] * voxel_size[2]; }

  // Metric center of BEV cell (i, j) in the xy plane.
  std::array<double, 2> grid_center(GridIndex g) const;
  std::array<double, 3> voxel_center(VoxelIndex v) const;

  bool operator==(const GridSpec&) const = default;
};

std::optional<VoxelIndex> voxel_index_of(const Point& p, const GridSpec& spec);
std::optional<GridIndex> grid_index_of(const Point& p, const GridSpec& spec);

inline GridIndex grid_of_voxel(VoxelIndex v, int downsample) {
  return {v.ix / downsample, v.iy / downsample};
}

// Non-empty BEV grids mapped to the ordinals (ascending) of the points they contain.
struct Occupancy {
  std::map<GridIndex, std::vector<std::size_t>> grids;
  std::size_t dropped = 0;

  std::size_t in_range_count() const;
};

Occupancy build_bev_occupancy(const PointCloud& cloud, const GridSpec& spec);

// Active voxel sites (strictly sorted, unique) with one feature row per site.
struct SparseTensor {
  std::vector<VoxelIndex> sites;
  Matrix features;
  std::array<int, 3> extent{0, 0, 0};

  std::size_t size() const { return sites.size(); }
  int channels() const { return static_cast<int>(features.cols()); }

  // Row of `v`, or -1 when the site is inactive.
  std::ptrdiff_t find(VoxelIndex v) const;
};

inline constexpr int kVoxelFeatureChannels = 4;

// Mean-pooled [x_off, y_off, z_off, intensity] per occupied voxel; offsets are
// relative to the voxel center in units of the voxel size.
SparseTensor voxelize_mean(const PointCloud& cloud, const GridSpec& spec);

}  // namespace bevmae
