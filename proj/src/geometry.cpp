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


#include "bevmae/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace bevmae {
namespace {

// Whole number of cells of size `cell` in [lo, hi), or throws.
int whole_cells(double lo, double hi, double cell, const char* axis) {
  if (!(hi > lo) || !(cell > 0.0)) {
    throw std::invalid_argument(std::string("GridSpec: degenerate ") + axis + " range or voxel size");
  }
  const double n = (hi - lo) / cell;
  const double r = std::round(n);
  if (r < 1.0 || std::abs(n - r) > 1e-6) {
    throw std::invalid_argument(std::string("GridSpec: ") + axis + " range is not a whole number of cells");
  }
  return static_cast<int>(r);
}

std::optional<int> bin(double v, double lo, double hi, double cell, int n) {
  if (!(v >= lo) || !(v < hi)) return std::nullopt;
  const int k = static_cast<int>(std::floor((v - lo) / cell));
  if (k < 0 || k >= n) return std::nullopt;
  return k;
}

}  // namespace

void GridSpec::validate() const {
  if (downsample < 1) throw std::invalid_argument("GridSpec: downsample ratio must be positive");
  const int nx = whole_cells(x_min, x_max, voxel_size[0], "x");
  const int ny = whole_cells(y_min, y_max, voxel_size[1], "y");
  whole_cells(z_min, z_max, voxel_size[2], "z");
  if (nx % downsample != 0 || ny % downsample != 0) {
    throw std::invalid_argument("GridSpec: xy ranges are not a whole number of BEV grids");
  }
}

int GridSpec::voxels_x() const { return static_cast<int>(std::round((x_max - x_min) / voxel_size[0])); }
int GridSpec::voxels_y() const { return static_cast<int>(std::round((y_max - y_min) / voxel_size[1])); }
int GridSpec::voxels_z() const { return static_cast<int>(std::round((z_max - z_min) / voxel_size[2])); }

std::array<double, 2> GridSpec::grid_center(GridIndex g) const {
  return {x_min + (g.i + 0.5) * grid_edge_x(), y_min + (g.j + 0.5) * grid_edge_y()};
}

std::array<double, 3> GridSpec::voxel_center(VoxelIndex v) const {
  return {x_min + (v.ix + 0.5) * voxel_size[0], y_min + (v.iy + 0.5) * voxel_size[1],
          z_min + (v.iz + 0.5) * voxel_size[2]};
}

std::optional<VoxelIndex> voxel_index_of(const Point& p, const GridSpec& spec) {
  const auto ix = bin(p.x, spec.x_min, spec.x_max, spec.voxel_size[0], spec.voxels_x());
  const auto iy = bin(p.y, spec.y_min, spec.y_max, spec.voxel_size[1], spec.voxels_y());
  const auto iz = bin(p.z, spec.z_min, spec.z_max, spec.voxel_size[2], spec.voxels_z());
  if (!ix || !iy || !iz) return std::nullopt;
  return VoxelIndex{*ix, *iy, *iz};
}

// Derived from the voxel index so that grid = voxel / d holds for every point,
// including those within rounding distance of a cell boundary.
std::optional<GridIndex> grid_index_of(const Point& p, const GridSpec& spec) {
  const auto v = voxel_index_of(p, spec);
  if (!v) return std::nullopt;
  return grid_of_voxel(*v, spec.downsample);
}

std::size_t Occupancy::in_range_count() const {
  std::size_t n = 0;
  for (const auto& [g, ordinals] : grids) n += ordinals.size();
  return n;
}

Occupancy build_bev_occupancy(const PointCloud& cloud, const GridSpec& spec) {
  spec.validate();
  Occupancy occ;
  for (std::size_t k = 0; k < cloud.points.size(); ++k) {
    const auto g = grid_index_of(cloud.points[k], spec);
    if (!g) {
      ++occ.dropped;
      continue;
    }
    occ.grids[*g].push_back(k);
  }
  return occ;
}

std::ptrdiff_t SparseTensor::find(VoxelIndex v) const {
  const auto it = std::lower_bound(sites.begin(), sites.end(), v);
  if (it == sites.end() || *it != v) return -1;
  return it - sites.begin();
}

SparseTensor voxelize_mean(const PointCloud& cloud, const GridSpec& spec) {
  spec.validate();
  std::map<VoxelIndex, std::pair<std::array<double, 4>, int>> acc;
  for (const Point& p : cloud.points) {
    const auto v = voxel_index_of(p, spec);
    if (!v) continue;
    const auto c = spec.voxel_center(*v);
    auto& [sum, count] = acc[*v];
    sum[0] += (p.x - c[0]) / spec.voxel_size[0];
    sum[1] += (p.y - c[1]) / spec.voxel_size[1];
    sum[2] += (p.z - c[2]) / spec.voxel_size[2];
    sum[3] += p.intensity;
    ++count;
  }
  SparseTensor out;
  out.extent = {spec.voxels_x(), spec.voxels_y(), spec.voxels_z()};
  out.sites.reserve(acc.size());
  out.features.resize(static_cast<Eigen::Index>(acc.size()), kVoxelFeatureChannels);
  Eigen::Index row = 0;
  for (const auto& [v, entry] : acc) {
    out.sites.push_back(v);
    for (int c = 0; c < kVoxelFeatureChannels; ++c) out.features(row, c) = entry.first[c] / entry.second;
    ++row;
  }
  return out;
}

}  // namespace bevmae
