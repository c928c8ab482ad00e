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

#include <gtest/gtest.h>

#include "bevmae/encoder.hpp"
#include "bevmae/model.hpp"
#include "bevmae/pipeline.hpp"
#include "bevmae/synthetic.hpp"
#include "oracles.hpp"

namespace bevmae {
namespace {

SceneData small_scene(const ModelConfig& model, std::uint64_t seed, std::size_t budget = 1500) {
  SceneConfig sc = SceneConfig::matching(model.grid);
  sc.n_objects = 3;
  sc.object_length = {1.0, 2.0};
  sc.object_width = {0.8, 1.2};
  sc.min_object_range = 1.0;
  sc.points_budget = budget;
  sc.seed = seed;
  return prepare_scene(generate_scene(sc), model);
}

TEST(EncoderConfig, DefaultStackTilesDefaultGrid) {
  const EncoderConfig cfg = EncoderConfig::default_stack();
  ASSERT_EQ(cfg.layers.size(), 4u);
  EXPECT_NO_THROW(cfg.validate(GridSpec{}));
  EXPECT_EQ(cfg.input_channels(), kVoxelFeatureChannels);
  EXPECT_EQ(cfg.output_channels(), 64);
}

TEST(EncoderConfig, DescribeParseRoundTrip) {
  const EncoderConfig cfg = EncoderConfig::default_stack();
  EXPECT_EQ(EncoderConfig::parse(cfg.describe()), cfg);
  EXPECT_THROW(EncoderConfig::parse("subm:4:16"), std::invalid_argument);
}

TEST(EncoderConfig, RejectsWrongDownsample) {
  EncoderConfig cfg = EncoderConfig::default_stack();
  cfg.layers[1].stride = {1, 1, 2};
  EXPECT_THROW(cfg.validate(GridSpec{}), std::invalid_argument);
  cfg = EncoderConfig::default_stack();
  cfg.layers[2].in_channels = 16;
  EXPECT_THROW(cfg.validate(GridSpec{}), std::invalid_argument);
  cfg = EncoderConfig::default_stack();
  cfg.layers[3].stride = {2, 2, 1};  // z left at 2 bins
  EXPECT_THROW(cfg.validate(GridSpec{}), std::invalid_argument);
}

TEST(BevFlatten, EmptyInputGivesZeroMap) {
  SparseTensor t;
  t.extent = {4, 3, 2};
  t.features.resize(0, 5);
  const Matrix map = bev_flatten(t);
  EXPECT_EQ(map.rows(), 12);
  EXPECT_EQ(map.cols(), 10);
  EXPECT_EQ(map.cwiseAbs().sum(), 0.0);
}

TEST(BevFlatten, OneSiteOneCell) {
  SparseTensor t;
  t.extent = {4, 3, 1};
  t.sites = {{2, 1, 0}};
  t.features = Matrix::Constant(1, 3, 0.5);
  const Matrix map = bev_flatten(t);
  int nonzero_cells = 0;
  for (Eigen::Index r = 0; r < map.rows(); ++r) nonzero_cells += map.row(r).cwiseAbs().sum() > 0.0 ? 1 : 0;
  EXPECT_EQ(nonzero_cells, 1);
  EXPECT_EQ(map.row(2 * 3 + 1), Matrix::Constant(1, 3, 0.5));
}

TEST(BevFlatten, ConservesMassAndMatchesTape) {
  SplitMix64 rng(1);
  const SparseTensor t = oracle::random_sparse(rng, {5, 6, 3}, 4, 0.3);
  const Matrix map = bev_flatten(t);
  EXPECT_NEAR(map.sum(), t.features.sum(), 1e-12);
  Tape tape;
  const Var v = bev_flatten(tape.leaf(t.features), t.sites, t.extent);
  EXPECT_EQ(v.value(), map);
  for (std::size_t r = 0; r < t.size(); ++r) {
    const VoxelIndex s = t.sites[r];
    EXPECT_EQ(map.block(s.ix * 6 + s.iy, s.iz * 4, 1, 4), t.features.row(static_cast<Eigen::Index>(r)));
  }
}

TEST(SubstituteToken, NoMaskedGridsIsIdentity) {
  const ModelConfig model = gradcheck_model_config();
  const SceneData scene = small_scene(model, 3);
  MaskPlan plan;
  for (const auto& [g, o] : scene.occupancy.grids) plan.visible.insert(g);
  const SparseTensor out = substitute_token(scene.voxels, scene.voxels, plan, RowVector::Ones(4), 8);
  EXPECT_EQ(out.sites, scene.voxels.sites);
  EXPECT_EQ(out.features, scene.voxels.features);
}

TEST(SubstituteToken, ZeroTokenKeepsPattern) {
  const ModelConfig model = gradcheck_model_config();
  const SceneData scene = small_scene(model, 4);
  const MaskedView view = mask_scene(scene, model, 0.7, 1);
  const SparseTensor out =
      substitute_token(scene.voxels, view.visible_voxels, view.plan, RowVector::Zero(4), model.grid.downsample);
  EXPECT_EQ(out.sites, scene.voxels.sites);
  std::size_t masked = 0;
  for (std::size_t r = 0; r < out.size(); ++r) {
    if (!view.masked_rows[r]) continue;
    ++masked;
    EXPECT_EQ(out.features.row(static_cast<Eigen::Index>(r)).cwiseAbs().sum(), 0.0);
  }
  EXPECT_GT(masked, 0u);
  EXPECT_EQ(out.features, encoder_input_rows(scene, view, RowVector::Zero(4)));
}

TEST(TokenProperties, SitePatternMatchesFullCloudAtEveryLayer) {
  const ModelConfig model = gradcheck_model_config();
  const SceneData scene = small_scene(model, 5);
  const MaskedView view = mask_scene(scene, model, 0.7, 2);
  const SparseTensor substituted =
      substitute_token(scene.voxels, view.visible_voxels, view.plan, RowVector::Ones(4), model.grid.downsample);
  const auto with_token = layer_site_patterns(plan_encoder(substituted.sites, substituted.extent, model.encoder));
  EXPECT_EQ(with_token, layer_site_patterns(scene.encoder_plan));
  const auto visible_only =
      layer_site_patterns(plan_encoder(view.visible_voxels.sites, view.visible_voxels.extent, model.encoder));
  EXPECT_NE(visible_only.front(), with_token.front());
}

TEST(TokenProperties, TokenReachesVisibleGrids) {
  const ModelConfig model = gradcheck_model_config();
  const SceneData scene = small_scene(model, 6);
  const MaskedView view = mask_scene(scene, model, 0.7, 3);
  ParameterSet params = init_model_params(model, 1);
  const Matrix before = encode(scene, view, model, params);
  params.at(kTokenName).array() += 0.1;
  const Matrix after = encode(scene, view, model, params);
  double change = 0.0;
  for (const GridIndex& g : view.plan.visible) {
    change = std::max(change, (after.row(g.i * model.grid.grids_y() + g.j) - before.row(g.i * model.grid.grids_y() + g.j))
                                  .cwiseAbs()
                                  .maxCoeff());
  }
  EXPECT_GT(change, 0.0);
}

TEST(TokenProperties, MaskedContentsDoNotLeak) {
  const ModelConfig model = gradcheck_model_config();
  const SceneData a = small_scene(model, 7);
  const MaskPlan plan = plan_mask(a.occupancy, 0.7, 4);

  // Same visible points; every masked grid refilled with different points.
  PointCloud other;
  SplitMix64 rng(8);
  for (const Point& p : a.cloud.points) {
    const auto g = grid_index_of(p, model.grid);
    if (g && !plan.is_masked(*g)) other.points.push_back(p);
  }
  for (const GridIndex& g : plan.masked) {
    const auto c = model.grid.grid_center(g);
    for (int k = 0; k < 5; ++k) {
      other.points.push_back({c[0] + rng.uniform(-0.39, 0.39), c[1] + rng.uniform(-0.39, 0.39),
                              rng.uniform(model.grid.z_min, model.grid.z_max), rng.uniform()});
    }
  }
  const SceneData b = prepare_scene(other, model);
  ASSERT_EQ(b.occupancy.grids.size(), a.occupancy.grids.size());
  const MaskedView va = mask_scene(a, model, plan);
  const MaskedView vb = mask_scene(b, model, plan);
  const RowVector token = oracle::random_matrix(rng, 1, 4);
  const Matrix ra = encoder_input_rows(a, va, token);
  const Matrix rb = encoder_input_rows(b, vb, token);
  for (std::size_t r = 0; r < a.voxels.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    if (va.masked_rows[r]) {
      EXPECT_EQ(ra.row(row), token);
    } else {
      const std::ptrdiff_t k = b.voxels.find(a.voxels.sites[r]);
      ASSERT_GE(k, 0);
      EXPECT_EQ(ra.row(row), rb.row(k));
    }
  }
  for (std::size_t r = 0; r < b.voxels.size(); ++r) {
    if (vb.masked_rows[r]) EXPECT_EQ(rb.row(static_cast<Eigen::Index>(r)), token);
  }
}

TEST(Encoder, ZeroWeightsGiveZeroMap) {
  const ModelConfig model = gradcheck_model_config();
  const SceneData scene = small_scene(model, 9);
  const MaskedView view = mask_scene(scene, model, 0.7, 5);
  ParameterSet params = init_model_params(model, 2);
  for (auto& p : params.entries()) {
    if (p.name.rfind("encoder.conv", 0) == 0) p.value.setZero();
  }
  const Matrix map = encode(scene, view, model, params);
  EXPECT_EQ(map.rows(), model.grid.grids_x() * model.grid.grids_y());
  EXPECT_EQ(map.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Encoder, LinearInTestMode) {
  ModelConfig model = gradcheck_model_config();
  model.encoder.relu = false;
  const SceneData scene = small_scene(model, 10);
  ParameterSet params = init_model_params(model, 3);
  for (auto& p : params.entries()) {
    if (p.name.find(".bias") != std::string::npos) p.value.setZero();
  }
  SplitMix64 rng(11);
  const Matrix x = oracle::random_matrix(rng, scene.voxels.features.rows(), 4);
  const Matrix y = oracle::random_matrix(rng, scene.voxels.features.rows(), 4);
  auto run = [&](const Matrix& in) {
    Tape tape;
    const BoundParams bound(tape, params);
    return Matrix(run_encoder(tape.constant(in), scene.encoder_plan, model.encoder, bound).value());
  };
  const Matrix combined = run(2.0 * x - 0.5 * y);
  const Matrix expected = 2.0 * run(x) - 0.5 * run(y);
  EXPECT_LE((combined - expected).cwiseAbs().maxCoeff(), 1e-10 * (1.0 + expected.cwiseAbs().maxCoeff()));
}

TEST(Encoder, ReceptiveFieldIsLocal) {
  // BEV cell i reads input voxels [8i - 8, 8i + 8] through the default stack,
  // so one changed site can only move the cells whose window contains it.
  const ModelConfig model = gradcheck_model_config();
  const SceneData scene = small_scene(model, 12);
  ParameterSet params = init_model_params(model, 4);
  Matrix x = scene.voxels.features;
  auto run = [&](const Matrix& in) {
    Tape tape;
    const BoundParams bound(tape, params);
    return Matrix(run_encoder(tape.constant(in), scene.encoder_plan, model.encoder, bound).value());
  };
  const Matrix base = run(x);
  const std::size_t r = scene.voxels.size() / 2;
  x.row(static_cast<Eigen::Index>(r)).array() += 1.0;
  const Matrix moved = run(x);
  const VoxelIndex s = scene.voxels.sites[r];
  const int ny = model.grid.grids_y();
  int changed = 0;
  for (Eigen::Index row = 0; row < base.rows(); ++row) {
    const int i = static_cast<int>(row) / ny;
    const int j = static_cast<int>(row) % ny;
    const bool near = std::abs(8 * i - s.ix) <= 8 && std::abs(8 * j - s.iy) <= 8;
    if (!near) EXPECT_EQ(base.row(row), moved.row(row)) << "cell " << i << "," << j;
    if (base.row(row) != moved.row(row)) ++changed;
  }
  EXPECT_GT(changed, 0);
}

}  // namespace
}  // namespace bevmae
