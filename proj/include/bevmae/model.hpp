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
#include <vector>

#include "bevmae/autodiff.hpp"
#include "bevmae/decoder.hpp"
#include "bevmae/encoder.hpp"
#include "bevmae/geometry.hpp"
#include "bevmae/gradcheck.hpp"
#include "bevmae/losses.hpp"
#include "bevmae/masking.hpp"
#include "bevmae/params.hpp"

namespace bevmae {

struct ModelConfig {
  GridSpec grid;
  EncoderConfig encoder = EncoderConfig::default_stack();
  DecoderConfig decoder;
  LossConfig loss;

  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

ParameterSet init_model_params(const ModelConfig& config, std::uint64_t seed);

// Mask-independent per-scene data. The full cloud's voxel sites drive the
// sparse convolutions whatever the mask, so the rulebooks are built once.
struct SceneData {
  PointCloud cloud;
  Occupancy occupancy;
  SparseTensor voxels;
  EncoderPlan encoder_plan;
};

SceneData prepare_scene(PointCloud cloud, const ModelConfig& config);

// One masked view of a scene.
struct MaskedView {
  MaskPlan plan;
  CloudSplit split;
  SparseTensor visible_voxels;
  std::vector<bool> masked_rows;  // per full-cloud site
  GridTargets targets;
};

MaskedView mask_scene(const SceneData& scene, const ModelConfig& config, const MaskPlan& plan);
MaskedView mask_scene(const SceneData& scene, const ModelConfig& config, double ratio, std::uint64_t seed);

// First-layer input, one row per full-cloud site: visible-cloud voxel
// features on visible sites, zeros on masked ones.
Matrix visible_input_rows(const SceneData& scene, const MaskedView& view);
// Same with the masked rows replaced by `token`.
Matrix encoder_input_rows(const SceneData& scene, const MaskedView& view, const RowVector& token);

// Token substitution, sparse stack and BEV flattening; returns the X x Y map.
Var encode(const SceneData& scene, const MaskedView& view, const ModelConfig& config, const BoundParams& params);
Matrix encode(const SceneData& scene, const MaskedView& view, const ModelConfig& config, const ParameterSet& params);

// Encoder on the full, unmasked cloud. Needs only the encoder convolutions,
// so it runs from an exported encoder checkpoint.
Matrix encode_unmasked(const SceneData& scene, const ModelConfig& config, const ParameterSet& params);

struct ForwardResult {
  Var bev;
  Var hidden;
  HeadOutputs heads;
  Var chamfer;
  Var density;
  Var total;
};

ForwardResult forward(const SceneData& scene, const MaskedView& view, const ModelConfig& config,
                      const BoundParams& params);

struct LossValues {
  double total = 0.0;
  double chamfer = 0.0;
  double density = 0.0;
};

struct LossAndGrad {
  LossValues loss;
  ParameterSet grads;
};

LossAndGrad loss_and_gradients(const ParameterSet& params, const ModelConfig& config, const SceneData& scene,
                               const MaskedView& view);

// Total loss plus the tape's branch signature, for gradient checking. A
// non-null `record` receives every branch decision of the evaluation.
Evaluation evaluate_loss(const ParameterSet& params, const ModelConfig& config, const SceneData& scene,
                         const MaskedView& view, BranchLog* record = nullptr);
// Total loss with ReLU gates, nearest-neighbour choices and smooth-L1 pieces
// taken from `branches` instead of recomputed.
double evaluate_loss_frozen(const ParameterSet& params, const ModelConfig& config, const SceneData& scene,
                            const MaskedView& view, const BranchLog& branches);

}  // namespace bevmae
