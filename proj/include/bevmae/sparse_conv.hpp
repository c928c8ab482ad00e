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
#include <cstdint>
#include <string>
#include <vector>

#include "bevmae/autodiff.hpp"
#include "bevmae/geometry.hpp"

namespace bevmae {

enum class ConvKind { kSubmanifold, kRegular };

std::string to_string(ConvKind kind);
ConvKind conv_kind_from_string(const std::string& s);

// One 3x3x3 sparse convolution layer. Weight layout is (27 * in) x out with
// tap t = (kx * 3 + ky) * 3 + kz occupying rows [t * in, (t + 1) * in).
// Output site o reads input o * stride + (k - 1) on each axis.
struct SparseConvLayer {
  ConvKind kind = ConvKind::kSubmanifold;
  int in_channels = 0;
  int out_channels = 0;
  std::array<int, 3> stride{1, 1, 1};

  bool operator==(const SparseConvLayer&) const = default;
};

inline constexpr int kKernelTaps = 27;

// Output extent of a padded 3-wide kernel: ceil(n / stride).
std::array<int, 3> conv_output_extent(const std::array<int, 3>& extent, const std::array<int, 3>& stride);

// Gather/scatter plan for one layer: output sites plus, per tap, the
// (input row, output row) pairs that contribute.
struct Rulebook {
  std::vector<VoxelIndex> out_sites;
  std::array<int, 3> out_extent{0, 0, 0};
  std::size_t in_rows = 0;
  std::array<std::vector<std::uint32_t>, kKernelTaps> in_rows_of_tap;
  std::array<std::vector<std::uint32_t>, kKernelTaps> out_rows_of_tap;

  std::size_t pair_count() const;
};

// `sites` must be strictly sorted. Submanifold layers require unit stride.
Rulebook build_rulebook(const std::vector<VoxelIndex>& sites, const std::array<int, 3>& extent,
                        const SparseConvLayer& layer);

// Weighted sum over taps without bias.
Matrix sparse_conv_forward(const Matrix& input, const Matrix& weights, const Rulebook& rules);

// Differentiable in input and weights.
Var sparse_conv(const Var& input, const Var& weights, const Rulebook& rules);

// Convenience: rulebook + weighted sum + per-channel bias.
SparseTensor sparse_conv3d(const SparseTensor& input, const Matrix& weights, const RowVector& bias,
                           const SparseConvLayer& layer);

}  // namespace bevmae
