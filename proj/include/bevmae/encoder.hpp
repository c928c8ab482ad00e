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

#include <string>
#include <vector>

#include "bevmae/autodiff.hpp"
#include "bevmae/geometry.hpp"
#include "bevmae/masking.hpp"
#include "bevmae/params.hpp"
#include "bevmae/random.hpp"
#include "bevmae/sparse_conv.hpp"

namespace bevmae {

struct EncoderConfig {
  std::vector<SparseConvLayer> layers;
  // Disabled only in test mode, which makes the stack affine in its input.
  bool relu = true;

  // subm 4->16, regular s(2,2,2) 16->32, regular s(2,2,2) 32->64, regular s(2,2,3) 64->64.
  static EncoderConfig default_stack(int in_channels = kVoxelFeatureChannels);

  int input_channels() const;
  int output_channels() const;
  // Channel chaining, x/y stride products equal to the downsample ratio and
  // a z extent that collapses to one bin.
  void validate(const GridSpec& grid) const;

  // Compact text form, e.g. "subm:4:16:1x1x1,regular:16:32:2x2x2".
  std::string describe() const;
  static EncoderConfig parse(const std::string& text, bool relu = true);

  bool operator==(const EncoderConfig&) const = default;
};

// Parameter names used by the encoder.
std::string encoder_weight_name(std::size_t layer);
std::string encoder_bias_name(std::size_t layer);
inline constexpr const char* kTokenName = "encoder.token";

// Kaiming-uniform weights, uniform(+-1/sqrt(fan_in)) biases, N(0, 0.02) token.
void init_encoder_params(ParameterSet& params, const EncoderConfig& config, SplitMix64& rng);

// Rulebooks of every layer for one input site pattern.
struct EncoderPlan {
  std::vector<Rulebook> layers;
  std::vector<VoxelIndex> input_sites;
  std::array<int, 3> input_extent{0, 0, 0};

  const std::vector<VoxelIndex>& output_sites() const { return layers.back().out_sites; }
  const std::array<int, 3>& output_extent() const { return layers.back().out_extent; }
};

EncoderPlan plan_encoder(const std::vector<VoxelIndex>& sites, const std::array<int, 3>& extent,
                         const EncoderConfig& config);

// Active-site pattern after each layer.
std::vector<std::vector<VoxelIndex>> layer_site_patterns(const EncoderPlan& plan);

// Per site of `full`: true when its BEV grid is masked. Throws when a site
// lies in a grid that is neither masked nor visible.
std::vector<bool> masked_site_rows(const SparseTensor& full, const MaskPlan& plan, int downsample);

// Full-cloud sites; masked-grid rows carry the token, visible rows carry the
// visible cloud's voxel features.
SparseTensor substitute_token(const SparseTensor& full, const SparseTensor& visible, const MaskPlan& plan,
                              const RowVector& token, int downsample);

// Differentiable in the token only; `base` supplies the unmasked rows.
Var substitute_token(const Matrix& base, const std::vector<bool>& masked_rows, const Var& token);

// Dense X x Y map stored as (X * Y) x (nz * C) with row i * Y + j. Each z
// bin occupies its own channel block; inactive cells are zero.
Matrix bev_flatten(const SparseTensor& input);
Var bev_flatten(const Var& features, const std::vector<VoxelIndex>& sites, const std::array<int, 3>& extent);

// Sparse conv stack followed by bev_flatten.
Var run_encoder(const Var& input_features, const EncoderPlan& plan, const EncoderConfig& config,
                const BoundParams& params);

}  // namespace bevmae
