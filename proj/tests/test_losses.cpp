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

#include <algorithm>
#include <cmath>

#include "bevmae/losses.hpp"
#include "bevmae/masking.hpp"
#include "bevmae/synthetic.hpp"
#include "oracles.hpp"

namespace bevmae {
namespace {

Matrix random_set(SplitMix64& rng, Eigen::Index n) { return oracle::random_matrix(rng, n, 3, 0.5); }

GridPrediction pred_of(const Matrix& coords, double density) { return {coords, density}; }

TEST(NormalizedOffsets, CenterAndCorner) {
  const GridSpec spec;
  const GridIndex g{10, 20};
  const auto c = spec.grid_center(g);
  const double zmid = 0.5 * (spec.z_min + spec.z_max);
  const std::vector<Point> pts = {{c[0], c[1], zmid, 0.0},
                                  {c[0] - 0.5 * spec.grid_edge_x(), c[1] - 0.5 * spec.grid_edge_y(), spec.z_min, 0.0}};
  const Matrix off = normalized_offsets(pts, g, spec);
  EXPECT_NEAR(off.row(0).cwiseAbs().maxCoeff(), 0.0, 1e-12);
  EXPECT_NEAR(off(1, 0), -0.5, 1e-12);
  EXPECT_NEAR(off(1, 1), -0.5, 1e-12);
  EXPECT_NEAR(off(1, 2), -0.5, 1e-12);
}

TEST(NormalizedOffsets, RoundTripAndRange) {
  const GridSpec spec;
  SplitMix64 rng(1);
  const PointCloud cloud = oracle::random_cloud(rng, spec, 500);
  for (const Point& p : cloud.points) {
    const GridIndex g = *grid_index_of(p, spec);
    const Matrix off = normalized_offsets(std::span(&p, 1), g, spec);
    for (int c = 0; c < 3; ++c) {
      EXPECT_GE(off(0, c), -0.5 - 1e-12);
      EXPECT_LE(off(0, c), 0.5 + 1e-12);
    }
    const Point q = denormalize_offset(off(0, 0), off(0, 1), off(0, 2), g, spec);
    EXPECT_NEAR(q.x, p.x, 1e-12);
    EXPECT_NEAR(q.y, p.y, 1e-12);
    EXPECT_NEAR(q.z, p.z, 1e-12);
  }
}

TEST(Chamfer, Examples) {
  Matrix a(1, 3);
  a << 0, 0, 0;
  Matrix b(1, 3);
  b << 1, 0, 0;
  EXPECT_DOUBLE_EQ(chamfer(a, b), 2.0);
  SplitMix64 rng(2);
  const Matrix s = random_set(rng, 9);
  EXPECT_EQ(chamfer(s, s), 0.0);
}

TEST(Chamfer, MatchesBruteForceAndIsPermutationInvariant) {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix p = random_set(rng, 1 + static_cast<Eigen::Index>(rng.below(32)));
    const Matrix t = random_set(rng, 1 + static_cast<Eigen::Index>(rng.below(32)));
    const double c = chamfer(p, t);
    EXPECT_NEAR(c, oracle::chamfer(p, t), 1e-12);
    EXPECT_GE(c, 0.0);
    Matrix q = p.colwise().reverse();
    EXPECT_NEAR(chamfer(q, t), c, 1e-12);
  }
}

TEST(Chamfer, RejectsEmptySets) {
  EXPECT_THROW(chamfer(Matrix(0, 3), Matrix::Zero(2, 3)), std::invalid_argument);
  EXPECT_THROW(chamfer(Matrix::Zero(2, 2), Matrix::Zero(2, 3)), std::invalid_argument);
}

TEST(SmoothL1, Examples) {
  EXPECT_EQ(smooth_l1(0.0), 0.0);
  EXPECT_DOUBLE_EQ(smooth_l1(0.5), 0.125);
  EXPECT_DOUBLE_EQ(smooth_l1(3.0), 2.5);
  EXPECT_DOUBLE_EQ(smooth_l1(-3.0), 2.5);
  EXPECT_NEAR(smooth_l1(1.0 - 1e-12), smooth_l1(1.0 + 1e-12), 1e-11);
}

TEST(DensityTarget, Examples) {
  const GridSpec spec;
  const GridIndex g{3, 3};
  const auto c = spec.grid_center(g);
  std::vector<Point> one = {{c[0] + 0.01, c[1] + 0.01, -1.0, 0.0}};
  EXPECT_NEAR(density_target(one, g, spec), 666.6666666666666, 1e-9);
  std::vector<Point> ten(10, one[0]);
  EXPECT_NEAR(density_target(ten, g, spec), 6666.666666666666, 1e-8);
}

TEST(DensityTarget, MatchesVoxelRecount) {
  const GridSpec spec;
  SplitMix64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const GridIndex g{static_cast<int>(rng.below(56)), static_cast<int>(rng.below(56))};
    const auto c = spec.grid_center(g);
    std::vector<Point> pts;
    const auto n = 1 + rng.below(40);
    for (std::uint64_t k = 0; k < n; ++k) {
      pts.push_back({c[0] + rng.uniform(-0.39, 0.39), c[1] + rng.uniform(-0.39, 0.39), rng.uniform(-2.0, -1.5), 0.0});
    }
    const double want = static_cast<double>(n) / (static_cast<double>(oracle::distinct_voxels(pts, spec)) * spec.voxel_volume());
    const double got = density_target(pts, g, spec);
    EXPECT_NEAR(got, want, 1e-9 * want);
    EXPECT_GT(got, 0.0);
  }
}

TEST(DensityTarget, RejectsPointOutsideGrid) {
  const GridSpec spec;
  const auto c = spec.grid_center({5, 5});
  std::vector<Point> pts = {{c[0] + 1.0, c[1], -1.0, 0.0}};
  EXPECT_THROW(density_target(pts, {5, 5}, spec), std::invalid_argument);
}

TEST(BuildTargets, OffsetsBoundedAndDensityScaled) {
  const GridSpec spec;
  SceneConfig sc = SceneConfig::matching(spec);
  sc.seed = 5;
  const PointCloud cloud = generate_scene(sc);
  const Occupancy occ = build_bev_occupancy(cloud, spec);
  const CloudSplit split = split_cloud(cloud, occ, plan_mask(occ, 0.7, 6));
  LossConfig cfg;
  const GridTargets targets = build_targets(split, spec, cfg);
  ASSERT_EQ(targets.grids.size(), split.masked_points_by_grid.size());
  for (const auto& [g, t] : targets.grids) {
    EXPECT_EQ(static_cast<std::size_t>(t.offsets.rows()), split.masked_points_by_grid.at(g).size());
    EXPECT_LE(t.offsets.cwiseAbs().maxCoeff(), 0.5);
    EXPECT_NEAR(t.density, density_target(split.masked_points_by_grid.at(g), g, spec) / 1000.0, 1e-12);
  }
  cfg.density_log = true;
  const GridTargets logged = build_targets(split, spec, cfg);
  const auto& [g0, t0] = *targets.grids.begin();
  EXPECT_NEAR(logged.grids.at(g0).density, std::log1p(t0.density), 1e-12);
}

TEST(Losses, AveragingOverGrids) {
  SplitMix64 rng(6);
  const Matrix p1 = random_set(rng, 4), t1 = random_set(rng, 5);
  const Matrix p2 = random_set(rng, 4), t2 = random_set(rng, 3);
  GridPredictions preds;
  GridTargets targets;
  preds.grids[{0, 0}] = pred_of(p1, 1.5);
  targets.grids[{0, 0}] = {t1, 1.0};
  EXPECT_DOUBLE_EQ(reconstruction_loss(preds, targets), chamfer(p1, t1));
  EXPECT_DOUBLE_EQ(density_loss(preds, targets), 0.125);

  preds.grids[{0, 1}] = pred_of(p2, 0.0);
  targets.grids[{0, 1}] = {t2, 3.0};
  EXPECT_NEAR(reconstruction_loss(preds, targets), 0.5 * (chamfer(p1, t1) + chamfer(p2, t2)), 1e-15);
  EXPECT_NEAR(density_loss(preds, targets), 0.5 * (0.125 + 2.5), 1e-15);

  LossConfig cfg;
  cfg.lambda_d = 0.0;
  EXPECT_EQ(total_loss(preds, targets, cfg), reconstruction_loss(preds, targets));
  cfg.lambda_d = 1.0;
  EXPECT_NEAR(total_loss(preds, targets, cfg), reconstruction_loss(preds, targets) + density_loss(preds, targets), 1e-15);
}

TEST(Losses, CopiesOfOneGridLeaveMeanUnchanged) {
  SplitMix64 rng(7);
  const Matrix p = random_set(rng, 6), t = random_set(rng, 7);
  GridPredictions one, many;
  GridTargets tone, tmany;
  one.grids[{0, 0}] = pred_of(p, 0.3);
  tone.grids[{0, 0}] = {t, 0.9};
  for (int k = 0; k < 5; ++k) {
    many.grids[{k, 0}] = pred_of(p, 0.3);
    tmany.grids[{k, 0}] = {t, 0.9};
  }
  EXPECT_NEAR(reconstruction_loss(many, tmany), reconstruction_loss(one, tone), 1e-15);
  EXPECT_NEAR(density_loss(many, tmany), density_loss(one, tone), 1e-15);
}

TEST(Losses, MismatchedGridSetsThrow) {
  GridPredictions preds;
  GridTargets targets;
  preds.grids[{0, 0}] = pred_of(Matrix::Zero(2, 3), 0.0);
  targets.grids[{1, 0}] = {Matrix::Zero(2, 3), 0.0};
  EXPECT_THROW(reconstruction_loss(preds, targets), std::invalid_argument);
  EXPECT_THROW(reconstruction_loss(GridPredictions{}, GridTargets{}), std::invalid_argument);
}

TEST(LossOps, TapeValuesMatchPlainLosses) {
  SplitMix64 rng(8);
  const int L = 5;
  const Matrix coords = oracle::random_matrix(rng, 3, 3 * L, 0.5);
  std::vector<Matrix> targets = {random_set(rng, 4), random_set(rng, 7), random_set(rng, 1)};
  double want = 0.0;
  for (int r = 0; r < 3; ++r) {
    const Matrix pr = Eigen::Map<const Matrix>(coords.row(r).data(), L, 3);
    want += chamfer(pr, targets[static_cast<std::size_t>(r)]) / 3.0;
  }
  Tape tape;
  const Var c = tape.leaf(coords);
  const Var loss = chamfer_loss(c, targets);
  EXPECT_NEAR(loss.value()(0, 0), want, 1e-14);

  const Matrix dens = oracle::random_matrix(rng, 3, 1, 3.0);
  const std::vector<double> dt = {0.1, -0.2, 2.0};
  const Var d = density_loss(tape.leaf(dens), dt, 1.0);
  double dwant = 0.0;
  for (int r = 0; r < 3; ++r) dwant += smooth_l1(dens(r, 0) - dt[static_cast<std::size_t>(r)]) / 3.0;
  EXPECT_NEAR(d.value()(0, 0), dwant, 1e-15);
}

TEST(LossOps, ChamferGradientMatchesDifferences) {
  // Away from ties the assignment is locally constant, so central
  // differences of the brute-force value check the subgradient.
  SplitMix64 rng(9);
  const int L = 6;
  const Matrix coords = oracle::random_matrix(rng, 2, 3 * L, 0.5);
  const std::vector<Matrix> targets = {random_set(rng, 5), random_set(rng, 8)};
  Tape tape;
  const Var c = tape.leaf(coords);
  tape.backward(chamfer_loss(c, targets));
  const Matrix g = tape.grad(c);
  auto value = [&](const Matrix& x) {
    double v = 0.0;
    for (int r = 0; r < 2; ++r) {
      v += oracle::chamfer(Eigen::Map<const Matrix>(x.row(r).data(), L, 3), targets[static_cast<std::size_t>(r)]) / 2.0;
    }
    return v;
  };
  const double h = 1e-6;
  for (Eigen::Index k = 0; k < coords.size(); ++k) {
    Matrix up = coords, down = coords;
    up.data()[k] += h;
    down.data()[k] -= h;
    EXPECT_NEAR(g.data()[k], (value(up) - value(down)) / (2 * h), 1e-7);
  }
}

TEST(LossOps, ChamferTieGoesToLowestIndex) {
  // Both predicted points are equidistant from the target; the gradient of
  // the target-side term lands on predicted point 0.
  Matrix coords(1, 6);
  coords << -1, 0, 0, 1, 0, 0;
  Tape tape;
  const Var c = tape.leaf(coords);
  tape.backward(chamfer_loss(c, {Matrix::Zero(1, 3)}));
  const Matrix g = tape.grad(c);
  // Point 0: pred term 2 * (-1) / 2 plus target term 2 * (-1) / 1.
  EXPECT_DOUBLE_EQ(g(0, 0), -1.0 - 2.0);
  EXPECT_DOUBLE_EQ(g(0, 3), 1.0);
}

}  // namespace
}  // namespace bevmae
