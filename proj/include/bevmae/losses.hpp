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

#include <map>
#include <span>
#include <vector>

#include "bevmae/autodiff.hpp"
#include "bevmae/decoder.hpp"
#include "bevmae/geometry.hpp"
#include "bevmae/masking.hpp"

namespace bevmae {

struct LossConfig {
  double lambda_d = 1.0;
  double beta = 1.0;
  // Densities are divided by this before the loss (1000: kilo-points per m^3).
  double density_scale = 1000.0;
  // Regress log(1 + scaled density) instead of the scaled density.
  bool density_log = false;

  bool operator==(const LossConfig&) const = default;
};

// N x 3 offsets from the grid center: x, y divided by the BEV grid edge, z
// measured from the z-range midpoint and divided by the z extent.
Matrix normalized_offsets(std::span<const Point> points, GridIndex grid, const GridSpec& spec);
// Inverse of normalized_offsets for one row.
Point denormalize_offset(double ox, double oy, double oz, GridIndex grid, const GridSpec& spec);

// Points per m^3 of occupied voxel volume, in raw units.
double density_target(std::span<const Point> points, GridIndex grid, const GridSpec& spec);

struct GridTarget {
  Matrix offsets;        // N x 3
  double density = 0.0;  // training units (see LossConfig)
};

struct GridTargets {
  std::map<GridIndex, GridTarget> grids;
};

double density_to_training_units(double raw_density, const LossConfig& config);

GridTargets build_targets(const CloudSplit& split, const GridSpec& spec, const LossConfig& config);

// Symmetric squared-distance Chamfer between an L x 3 and an N x 3 set.
double chamfer(const Matrix& pred, const Matrix& target);
double smooth_l1(double x, double beta = 1.0);

double reconstruction_loss(const GridPredictions& preds, const GridTargets& targets);
double density_loss(const GridPredictions& preds, const GridTargets& targets, double beta = 1.0);
double total_loss(const GridPredictions& preds, const GridTargets& targets, const LossConfig& config);

// Mean over rows of per-row Chamfer; row r of `coords` holds L points as
// (x, y, z) triples and is compared with targets[r]. Nearest-neighbour
// choices are treated as constant in the backward pass, lowest index on ties.
Var chamfer_loss(const Var& coords, std::vector<Matrix> targets);
// Mean over rows of smooth_l1(pred - target).
Var density_loss(const Var& density, std::vector<double> targets, double beta);

}  // namespace bevmae
