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

#include <cmath>

#include "bevmae/geometry.hpp"
#include "bevmae/synthetic.hpp"

namespace bevmae {
namespace {

TEST(Generator, ZeroBudgetIsEmpty) {
  SceneConfig cfg;
  cfg.points_budget = 0;
  EXPECT_TRUE(generate_scene(cfg).empty());
}

TEST(Generator, DeterministicPerSeed) {
  SceneConfig cfg;
  cfg.seed = 17;
  const PointCloud a = generate_scene(cfg);
  const PointCloud b = generate_scene(cfg);
  EXPECT_EQ(a.points, b.points);
  cfg.seed = 18;
  EXPECT_NE(generate_scene(cfg).points, a.points);
}

TEST(Generator, PointsStayInsideTheMatchingGrid) {
  const GridSpec spec;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SceneConfig cfg = SceneConfig::matching(spec);
    cfg.seed = seed;
    const PointCloud cloud = generate_scene(cfg);
    EXPECT_GT(cloud.size(), 1000u);
    EXPECT_EQ(build_bev_occupancy(cloud, spec).dropped, 0u);
    for (const Point& p : cloud.points) {
      EXPECT_GE(p.intensity, 0.0);
      EXPECT_LT(p.intensity, 1.0);
    }
  }
}

TEST(Generator, AcceptanceProbability) {
  EXPECT_EQ(acceptance_probability(2.0, 5.0, 2.0), 1.0);
  EXPECT_DOUBLE_EQ(acceptance_probability(10.0, 5.0, 2.0), 0.25);
  EXPECT_EQ(acceptance_probability(40.0, 5.0, 0.0), 1.0);
}

TEST(Generator, RejectsInvalidConfig) {
  SceneConfig cfg;
  cfg.falloff_alpha = -1.0;
  EXPECT_THROW(generate_scene(cfg), std::invalid_argument);
  cfg = SceneConfig{};
  cfg.object_length = {5.0, 3.0};
  EXPECT_THROW(generate_scene(cfg), std::invalid_argument);
  cfg = SceneConfig{};
  cfg.ground_z = 5.0;
  EXPECT_THROW(generate_scene(cfg), std::invalid_argument);
}

// Ground points per m^2 in annuli [lo, hi) around the sensor.
std::vector<double> ground_density(const SceneConfig& cfg, const std::vector<double>& edges) {
  const PointCloud cloud = generate_scene(cfg);
  std::vector<double> count(edges.size() - 1, 0.0);
  for (const Point& p : cloud.points) {
    const double r = std::hypot(p.x, p.y);
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
      if (r >= edges[k] && r < edges[k + 1]) count[k] += 1.0;
    }
  }
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    count[k] /= 3.141592653589793 * (edges[k + 1] * edges[k + 1] - edges[k] * edges[k]);
  }
  return count;
}

TEST(Generator, NoFalloffGivesUniformAreaDensity) {
  SceneConfig cfg;
  cfg.n_objects = 0;
  cfg.falloff_alpha = 0.0;
  cfg.points_budget = 200000;
  cfg.seed = 3;
  const std::vector<double> d = ground_density(cfg, {0.0, 7.0, 14.0, 21.0});
  const double expected = 200000.0 / (44.8 * 44.8);
  for (double v : d) EXPECT_NEAR(v / expected, 1.0, 0.03);
}

TEST(Generator, FalloffThinsDistantGround) {
  SceneConfig cfg;
  cfg.n_objects = 0;
  cfg.points_budget = 200000;
  cfg.seed = 4;
  const std::vector<double> d = ground_density(cfg, {6.0, 8.0, 12.0, 14.0, 18.0, 20.0});
  // Ground points sit 1.7 m below the sensor; the expected ratio follows (r0 / r)^2.
  EXPECT_GT(d[0], d[2]);
  EXPECT_GT(d[2], d[4]);
  const double ratio = d[0] / d[4];
  const double r_near = std::hypot(7.0, 1.7), r_far = std::hypot(19.0, 1.7);
  EXPECT_NEAR(ratio, (r_far * r_far) / (r_near * r_near), 0.6);
}

}  // namespace
}  // namespace bevmae
