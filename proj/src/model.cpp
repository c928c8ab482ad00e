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


#include "bevmae/model.hpp"

#include <stdexcept>

#include "bevmae/random.hpp"

namespace bevmae {

void ModelConfig::validate() const {
  encoder.validate(grid);
  if (encoder.input_channels() != kVoxelFeatureChannels) {
    throw std::invalid_argument("ModelConfig: first encoder layer must take " +
                                std::to_string(kVoxelFeatureChannels) + " voxel feature channels");
  }
  if (decoder.num_points < 1) throw std::invalid_argument("ModelConfig: num_points must be positive");
  if (decoder.channels < 1) throw std::invalid_argument("ModelConfig: decoder channels must be positive");
  if (loss.lambda_d < 0.0) throw std::invalid_argument("ModelConfig: lambda_d must be non-negative");
  if (!(loss.beta > 0.0)) throw std::invalid_argument("ModelConfig: beta must be positive");
  if (!(loss.density_scale > 0.0)) throw std::invalid_argument("ModelConfig: density_scale must be positive");
}

ParameterSet init_model_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  SplitMix64 rng(seed);
  ParameterSet params;
  init_encoder_params(params, config.encoder, rng);
  // The BEV map stacks the remaining z bins (one after validation).
  init_decoder_params(params, config.decoder, config.encoder.output_channels(), rng);
  return params;
}

SceneData prepare_scene(PointCloud cloud, const ModelConfig& config) {
  SceneData scene;
  scene.occupancy = build_bev_occupancy(cloud, config.grid);
  scene.voxels = voxelize_mean(cloud, config.grid);
  scene.encoder_plan = plan_encoder(scene.voxels.sites, scene.voxels.extent, config.encoder);
  scene.cloud = std::move(cloud);
  return scene;
}

MaskedView mask_scene(const SceneData& scene, const ModelConfig& config, const MaskPlan& plan) {
  MaskedView view;
  view.plan = plan;
  view.split = split_cloud(scene.cloud, scene.occupancy, plan);
  view.visible_voxels = voxelize_mean(view.split.visible_points, config.grid);
  view.masked_rows = masked_site_rows(scene.voxels, plan, config.grid.downsample);
  view.targets = build_targets(view.split, config.grid, config.loss);
  return view;
}

MaskedView mask_scene(const SceneData& scene, const ModelConfig& config, double ratio, std::uint64_t seed) {
  return mask_scene(scene, config, plan_mask(scene.occupancy, ratio, seed));
}

Matrix visible_input_rows(const SceneData& scene, const MaskedView& view) {
  // Unmasked rows come from the visible cloud only.
  Matrix base = Matrix::Zero(scene.voxels.features.rows(), scene.voxels.features.cols());
  for (std::size_t r = 0; r < scene.voxels.sites.size(); ++r) {
    if (view.masked_rows[r]) continue;
    const std::ptrdiff_t v = view.visible_voxels.find(scene.voxels.sites[r]);
    if (v < 0) throw std::logic_error("encode: visible site missing from the visible voxels");
    base.row(static_cast<Eigen::Index>(r)) = view.visible_voxels.features.row(v);
  }
  return base;
}

Matrix encoder_input_rows(const SceneData& scene, const MaskedView& view, const RowVector& token) {
  Matrix rows = visible_input_rows(scene, view);
  for (std::size_t r = 0; r < scene.voxels.sites.size(); ++r) {
    if (view.masked_rows[r]) rows.row(static_cast<Eigen::Index>(r)) = token;
  }
  return rows;
}

Var encode(const SceneData& scene, const MaskedView& view, const ModelConfig& config, const BoundParams& params) {
  const Var input = substitute_token(visible_input_rows(scene, view), view.masked_rows, params[kTokenName]);
  return run_encoder(input, scene.encoder_plan, config.encoder, params);
}

Matrix encode(const SceneData& scene, const MaskedView& view, const ModelConfig& config, const ParameterSet& params) {
  Tape tape;
  const BoundParams bound(tape, params);
  return encode(scene, view, config, bound).value();
}

Matrix encode_unmasked(const SceneData& scene, const ModelConfig& config, const ParameterSet& params) {
  Tape tape;
  const BoundParams bound(tape, params);
  return run_encoder(tape.constant(scene.voxels.features), scene.encoder_plan, config.encoder, bound).value();
}

ForwardResult forward(const SceneData& scene, const MaskedView& view, const ModelConfig& config,
                      const BoundParams& params) {
  const int nx = config.grid.grids_x();
  const int ny = config.grid.grids_y();
  ForwardResult out;
  out.bev = encode(scene, view, config, params);
  out.hidden = decode(out.bev, nx, ny, config.decoder, params);
  out.heads = predict_at(out.hidden, nx, ny, view.plan, params);

  std::vector<Matrix> offsets;
  std::vector<double> densities;
  offsets.reserve(out.heads.grids.size());
  densities.reserve(out.heads.grids.size());
  for (const GridIndex& g : out.heads.grids) {
    const GridTarget& t = view.targets.grids.at(g);
    offsets.push_back(t.offsets);
    densities.push_back(t.density);
  }
  out.chamfer = chamfer_loss(out.heads.coords, std::move(offsets));
  out.density = density_loss(out.heads.density, std::move(densities), config.loss.beta);
  out.total = add(out.chamfer, scale(out.density, config.loss.lambda_d));
  return out;
}

LossAndGrad loss_and_gradients(const ParameterSet& params, const ModelConfig& config, const SceneData& scene,
                               const MaskedView& view) {
  Tape tape;
  const BoundParams bound(tape, params);
  const ForwardResult f = forward(scene, view, config, bound);
  tape.backward(f.total);
  LossAndGrad out;
  out.loss = {f.total.value()(0, 0), f.chamfer.value()(0, 0), f.density.value()(0, 0)};
  out.grads = bound.gradients(params);
  return out;
}

Evaluation evaluate_loss(const ParameterSet& params, const ModelConfig& config, const SceneData& scene,
                         const MaskedView& view, BranchLog* record) {
  Tape tape;
  tape.record_branches(record);
  const BoundParams bound(tape, params);
  const ForwardResult f = forward(scene, view, config, bound);
  return {f.total.value()(0, 0), tape.branch_signature()};
}

double evaluate_loss_frozen(const ParameterSet& params, const ModelConfig& config, const SceneData& scene,
                            const MaskedView& view, const BranchLog& branches) {
  Tape tape;
  tape.replay_branches(&branches);
  const BoundParams bound(tape, params);
  return forward(scene, view, config, bound).total.value()(0, 0);
}

}  // namespace bevmae
