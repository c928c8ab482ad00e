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

#include "bevmae/sparse_conv.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace bevmae {
namespace {

std::uint64_t pack(const VoxelIndex& v) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(v.ix)) << 42) |
         (static_cast<std::uint64_t>(static_cast<std::uint32_t>(v.iy)) << 21) |
         static_cast<std::uint64_t>(static_cast<std::uint32_t>(v.iz));
}

bool in_extent(const VoxelIndex& v, const std::array<int, 3>& e) {
  return v.ix >= 0 && v.iy >= 0 && v.iz >= 0 && v.ix < e[0] && v.iy < e[1] && v.iz < e[2];
}

Matrix gather(const Matrix& m, const std::vector<std::uint32_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
  return out;
}

void scatter_add(Matrix& dst, const Matrix& src, const std::vector<std::uint32_t>& rows) {
  for (std::size_t r = 0; r < rows.size(); ++r) dst.row(rows[r]) += src.row(static_cast<Eigen::Index>(r));
}

void check_shapes(const Matrix& input, const Matrix& weights, const Rulebook& rules) {
  if (static_cast<std::size_t>(input.rows()) != rules.in_rows) {
    throw std::invalid_argument("sparse_conv: input rows do not match rulebook");
  }
  if (weights.rows() != kKernelTaps * input.cols()) {
    throw std::invalid_argument("sparse_conv: weight rows must be 27 * in_channels");
  }
}

}  // namespace

std::string to_string(ConvKind kind) {
  return kind == ConvKind::kSubmanifold ? "subm" : "regular";
}

ConvKind conv_kind_from_string(const std::string& s) {
  if (s == "subm" || s == "submanifold") return ConvKind::kSubmanifold;
  if (s == "regular") return ConvKind::kRegular;
  throw std::invalid_argument("unknown conv kind '" + s + "'");
}

std::array<int, 3> conv_output_extent(const std::array<int, 3>& extent, const std::array<int, 3>& stride) {
  std::array<int, 3> out{};
  for (int a = 0; a < 3; ++a) {
    if (stride[a] < 1) throw std::invalid_argument("conv stride must be positive");
    out[a] = (extent[a] + stride[a] - 1) / stride[a];
  }
  return out;
}

std::size_t Rulebook::pair_count() const {
  std::size_t n = 0;
  for (const auto& taps : in_rows_of_tap) n += taps.size();
  return n;
}

Rulebook build_rulebook(const std::vector<VoxelIndex>& sites, const std::array<int, 3>& extent,
                        const SparseConvLayer& layer) {
  for (std::size_t k = 1; k < sites.size(); ++k) {
    if (!(sites[k - 1] < sites[k])) throw std::invalid_argument("build_rulebook: sites not strictly sorted");
  }
  Rulebook rb;
  rb.in_rows = sites.size();

  if (layer.kind == ConvKind::kSubmanifold) {
    if (layer.stride != std::array<int, 3>{1, 1, 1}) {
      throw std::invalid_argument("build_rulebook: submanifold convolution requires unit stride");
    }
    rb.out_sites = sites;
    rb.out_extent = extent;
    std::unordered_map<std::uint64_t, std::uint32_t> row_of;
    row_of.reserve(sites.size() * 2);
    for (std::size_t r = 0; r < sites.size(); ++r) row_of.emplace(pack(sites[r]), static_cast<std::uint32_t>(r));
    for (std::size_t o = 0; o < sites.size(); ++o) {
      const VoxelIndex& s = sites[o];
      for (int t = 0; t < kKernelTaps; ++t) {
        const VoxelIndex n{s.ix + t / 9 - 1, s.iy + (t / 3) % 3 - 1, s.iz + t % 3 - 1};
        if (!in_extent(n, extent)) continue;
        auto it = row_of.find(pack(n));
        if (it == row_of.end()) continue;
        rb.in_rows_of_tap[t].push_back(it->second);
        rb.out_rows_of_tap[t].push_back(static_cast<std::uint32_t>(o));
      }
    }
    return rb;
  }

  rb.out_extent = conv_output_extent(extent, layer.stride);
  struct Contribution {
    VoxelIndex out;
    int tap;
    std::uint32_t in_row;
  };
  std::vector<Contribution> contributions;
  contributions.reserve(sites.size() * 8);
  const auto& st = layer.stride;
  for (std::size_t r = 0; r < sites.size(); ++r) {
    const VoxelIndex& s = sites[r];
    for (int t = 0; t < kKernelTaps; ++t) {
      const std::array<int, 3> k{t / 9, (t / 3) % 3, t % 3};
      const std::array<int, 3> num{s.ix + 1 - k[0], s.iy + 1 - k[1], s.iz + 1 - k[2]};
      bool ok = true;
      for (int a = 0; a < 3 && ok; ++a) ok = num[a] >= 0 && num[a] % st[a] == 0;
      if (!ok) continue;
      const VoxelIndex o{num[0] / st[0], num[1] / st[1], num[2] / st[2]};
      if (!in_extent(o, rb.out_extent)) continue;
      contributions.push_back({o, t, static_cast<std::uint32_t>(r)});
    }
  }
  rb.out_sites.reserve(contributions.size());
  for (const auto& c : contributions) rb.out_sites.push_back(c.out);
  std::sort(rb.out_sites.begin(), rb.out_sites.end());
  rb.out_sites.erase(std::unique(rb.out_sites.begin(), rb.out_sites.end()), rb.out_sites.end());

  std::unordered_map<std::uint64_t, std::uint32_t> out_row;
  out_row.reserve(rb.out_sites.size() * 2);
  for (std::size_t r = 0; r < rb.out_sites.size(); ++r) {
    out_row.emplace(pack(rb.out_sites[r]), static_cast<std::uint32_t>(r));
  }
  for (const auto& c : contributions) {
    rb.in_rows_of_tap[c.tap].push_back(c.in_row);
    rb.out_rows_of_tap[c.tap].push_back(out_row.at(pack(c.out)));
  }
  return rb;
}

Matrix sparse_conv_forward(const Matrix& input, const Matrix& weights, const Rulebook& rules) {
  check_shapes(input, weights, rules);
  const Eigen::Index cin = input.cols();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rules.out_sites.size()), weights.cols());
  for (int t = 0; t < kKernelTaps; ++t) {
    if (rules.in_rows_of_tap[t].empty()) continue;
    const Matrix gathered = gather(input, rules.in_rows_of_tap[t]);
    const Matrix contrib = gathered * weights.middleRows(t * cin, cin);
    scatter_add(out, contrib, rules.out_rows_of_tap[t]);
  }
  return out;
}

Var sparse_conv(const Var& input, const Var& weights, const Rulebook& rules) {
  Tape& tape = input.tape();
  Matrix out = sparse_conv_forward(input.value(), weights.value(), rules);
  const Var inputs[] = {input, weights};
  // The rulebook is owned by the caller and outlives the tape's backward pass.
  return tape.record(std::move(out), inputs, [&tape, input, weights, &rules](const Matrix& g) {
    const Matrix& x = input.value();
    const Matrix& w = weights.value();
    const Eigen::Index cin = x.cols();
    const bool need_x = tape.requires_grad(input);
    const bool need_w = tape.requires_grad(weights);
    for (int t = 0; t < kKernelTaps; ++t) {
      const auto& in_rows = rules.in_rows_of_tap[t];
      if (in_rows.empty()) continue;
      const Matrix g_out = gather(g, rules.out_rows_of_tap[t]);
      if (need_w) {
        const Matrix gathered = gather(x, in_rows);
        tape.grad_slot(weights).middleRows(t * cin, cin).noalias() += gathered.transpose() * g_out;
      }
      if (need_x) {
        const Matrix g_in = g_out * w.middleRows(t * cin, cin).transpose();
        scatter_add(tape.grad_slot(input), g_in, in_rows);
      }
    }
  });
}

SparseTensor sparse_conv3d(const SparseTensor& input, const Matrix& weights, const RowVector& bias,
                           const SparseConvLayer& layer) {
  if (input.channels() != layer.in_channels || weights.cols() != layer.out_channels ||
      bias.cols() != layer.out_channels) {
    throw std::invalid_argument("sparse_conv3d: channel mismatch");
  }
  const Rulebook rules = build_rulebook(input.sites, input.extent, layer);
  SparseTensor out;
  out.features = sparse_conv_forward(input.features, weights, rules);
  out.features.rowwise() += bias;
  out.sites = rules.out_sites;
  out.extent = rules.out_extent;
  return out;
}

}  // namespace bevmae
