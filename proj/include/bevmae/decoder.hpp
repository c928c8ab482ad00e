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
#include <string>
#include <vector>

#include "bevmae/autodiff.hpp"
#include "bevmae/geometry.hpp"
#include "bevmae/masking.hpp"
#include "bevmae/params.hpp"
#include "bevmae/random.hpp"

namespace bevmae {

// kConv3x3 is the default. kResidual stacks two 3x3 convs with a skip
// connection around the second one.
enum class DecoderKind { kConv3x3, kResidual };

std::string to_string(DecoderKind kind);
DecoderKind decoder_kind_from_string(const std::string& s);

struct DecoderConfig {
  DecoderKind kind = DecoderKind::kConv3x3;
  int channels = 64;
  int num_points = 20;  // L
  bool relu = true;     // between the decoder conv and the heads

  bool operator==(const DecoderConfig&) const = default;
};

void init_decoder_params(ParameterSet& params, const DecoderConfig& config, int in_channels, SplitMix64& rng);

// 3x3 convolution, stride 1, zero padding 1, over a (X * Y) x C map with row
// i * Y + j. Weight is (9 * C_in) x C_out with tap t = kx * 3 + ky reading
// cell (i + kx - 1, j + ky - 1).
Matrix conv2d_3x3_forward(const Matrix& map, int nx, int ny, const Matrix& weights);
Var conv2d_3x3(const Var& map, int nx, int ny, const Var& weights);

// Hidden map of the same X x Y resolution.
Var decode(const Var& bev, int nx, int ny, const DecoderConfig& config, const BoundParams& params);

// Head outputs for the masked grids in ascending grid order.
struct HeadOutputs {
  std::vector<GridIndex> grids;
  Var coords;   // n_m x 3L, row-major (x, y, z) per predicted point
  Var density;  // n_m x 1
};

HeadOutputs predict_at(const Var& hidden, int nx, int ny, const MaskPlan& plan, const BoundParams& params);

struct GridPrediction {
  Matrix coords;  // L x 3 normalized offsets
  double density = 0.0;
};

struct GridPredictions {
  std::map<GridIndex, GridPrediction> grids;
};

GridPredictions to_predictions(const HeadOutputs& heads);

}  // namespace bevmae
