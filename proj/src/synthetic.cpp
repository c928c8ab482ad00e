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


#include "bevmae/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "bevmae/random.hpp"

namespace bevmae {
namespace {

// Rectangle origin + two edge vectors.
struct Surface {
  std::array<double, 3> origin;
  std::array<double, 3> u;
  std::array<double, 3> v;
  double area;
};

Surface make_surface(std::array<double, 3> o, std::array<double, 3> u, std::array<double, 3> v) {
  const double lu = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
  const double lv = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {o, u, v, lu * lv};
}

void check_range(const std::array<double, 2>& r, const char* what) {
  if (!(r[0] > 0.0) || !(r[1] >= r[0])) throw std::invalid_argument(std::string("SceneConfig: bad ") + what + " range");
}

}  // namespace

void SceneConfig::validate() const {
  check_range(object_length, "object length");
  check_range(object_width, "object width");
  check_range(object_height, "object height");
  if (!(x_max > x_min) || !(y_max > y_min) || !(z_max > z_min)) throw std::invalid_argument("SceneConfig: empty extent");
  if (!(ground_z >= z_min && ground_z < z_max)) throw std::invalid_argument("SceneConfig: ground outside z window");
  if (falloff_alpha < 0.0) throw std::invalid_argument("SceneConfig: falloff exponent must be >= 0");
  if (!(falloff_r0 > 0.0)) throw std::invalid_argument("SceneConfig: falloff reference range must be > 0");
  if (noise_sigma < 0.0) throw std::invalid_argument("SceneConfig: noise sigma must be >= 0");
  if (min_object_range < 0.0) throw std::invalid_argument("SceneConfig: min object range must be >= 0");
}

SceneConfig SceneConfig::matching(const GridSpec& grid) {
  SceneConfig cfg;
  cfg.x_min = grid.x_min;
  cfg.x_max = grid.x_max;
  cfg.y_min = grid.y_min;
  cfg.y_max = grid.y_max;
  cfg.z_min = grid.z_min;
  cfg.z_max = grid.z_max;
  return cfg;
}

double acceptance_probability(double range, double r0, double alpha) {
  if (alpha == 0.0 || range <= r0) return 1.0;
  return std::pow(r0 / range, alpha);
}

PointCloud generate_scene(const SceneConfig& config) {
  config.validate();
  SplitMix64 rng(config.seed);
  PointCloud cloud;
  cloud.frame_id = "synthetic-" + std::to_string(config.seed);

  std::vector<Surface> surfaces;
  surfaces.push_back(make_surface({config.x_min, config.y_min, config.ground_z}, {config.x_max - config.x_min, 0, 0},
                                  {0, config.y_max - config.y_min, 0}));
  for (std::size_t k = 0; k < config.n_objects; ++k) {
    double lx = rng.uniform(config.object_length[0], config.object_length[1]);
    double ly = rng.uniform(config.object_width[0], config.object_width[1]);
    const double h = rng.uniform(config.object_height[0], config.object_height[1]);
    if (rng.uniform() < 0.5) std::swap(lx, ly);
    if (lx >= config.x_max - config.x_min || ly >= config.y_max - config.y_min) continue;
    double cx = 0.0, cy = 0.0;
    bool placed = false;
    for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
      cx = rng.uniform(config.x_min + lx / 2, config.x_max - lx / 2);
      cy = rng.uniform(config.y_min + ly / 2, config.y_max - ly / 2);
      placed = std::hypot(cx - config.sensor[0], cy - config.sensor[1]) >= config.min_object_range;
    }
    if (!placed) continue;
    const double x0 = cx - lx / 2, y0 = cy - ly / 2, z0 = config.ground_z;
    const double top = std::min(z0 + h, config.z_max);
    const double hh = top - z0;
    surfaces.push_back(make_surface({x0, y0, z0}, {lx, 0, 0}, {0, 0, hh}));
    surfaces.push_back(make_surface({x0, y0 + ly, z0}, {lx, 0, 0}, {0, 0, hh}));
    surfaces.push_back(make_surface({x0, y0, z0}, {0, ly, 0}, {0, 0, hh}));
    surfaces.push_back(make_surface({x0 + lx, y0, z0}, {0, ly, 0}, {0, 0, hh}));
    surfaces.push_back(make_surface({x0, y0, top}, {lx, 0, 0}, {0, ly, 0}));
  }

  std::vector<double> cumulative;
  cumulative.reserve(surfaces.size());
  double total = 0.0;
  for (const auto& s : surfaces) cumulative.push_back(total += s.area);

  cloud.points.reserve(config.points_budget / 4);
  for (std::size_t n = 0; n < config.points_budget; ++n) {
    const double pick = rng.uniform() * total;
    const auto which = std::min<std::size_t>(
        static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin()),
        surfaces.size() - 1);
    const Surface& s = surfaces[which];
    const double a = rng.uniform();
    const double b = rng.uniform();
    std::array<double, 3> p{};
    for (int c = 0; c < 3; ++c) p[c] = s.origin[c] + a * s.u[c] + b * s.v[c];
    const double range = std::sqrt((p[0] - config.sensor[0]) * (p[0] - config.sensor[0]) +
                                   (p[1] - config.sensor[1]) * (p[1] - config.sensor[1]) +
                                   (p[2] - config.sensor[2]) * (p[2] - config.sensor[2]));
    const double keep = rng.uniform();
    const double nx = rng.normal(), ny = rng.normal(), nz = rng.normal();
    const double intensity = rng.uniform();
    if (keep >= acceptance_probability(range, config.falloff_r0, config.falloff_alpha)) continue;
    Point q{p[0] + config.noise_sigma * nx, p[1] + config.noise_sigma * ny, p[2] + config.noise_sigma * nz, intensity};
    if (q.x < config.x_min || q.x >= config.x_max || q.y < config.y_min || q.y >= config.y_max || q.z < config.z_min ||
        q.z >= config.z_max) {
      continue;
    }
    cloud.points.push_back(q);
  }
  return cloud;
}

}  // namespace bevmae
