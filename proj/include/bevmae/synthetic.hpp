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

#include <array>
#include <cstddef>
#include <cstdint>

#include "bevmae/geometry.hpp"

namespace bevmae {

// Ground plane plus axis-aligned boxes, sampled by surface area and thinned
// with a radial acceptance probability min(1, (r0 / r)^alpha).
struct SceneConfig {
  std::size_t n_objects = 12;
  std::array<double, 2> object_length{3.5, 5.0};
  std::array<double, 2> object_width{1.6, 2.2};
  std::array<double, 2> object_height{0.8, 1.4};
  double min_object_range = 3.0;

  // Ground extent in xy and the z window points must fall in.
  double x_min = -22.4, x_max = 22.4;
  double y_min = -22.4, y_max = 22.4;
  double z_min = -2.0, z_max = -0.2;
  double ground_z = -1.7;
  std::array<double, 3> sensor{0.0, 0.0, 0.0};

  // Number of candidate surface samples before thinning.
  std::size_t points_budget = 24000;
  double falloff_alpha = 2.0;
  double falloff_r0 = 5.0;
  double noise_sigma = 0.02;
  std::uint64_t seed = 0;

  void validate() const;
  // Extent and z window taken from a grid spec.
  static SceneConfig matching(const GridSpec& grid);

  bool operator==(const SceneConfig&) const = default;
};

double acceptance_probability(double range, double r0, double alpha);

PointCloud generate_scene(const SceneConfig& config);

}  // namespace bevmae
