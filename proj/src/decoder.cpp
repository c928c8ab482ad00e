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

#include "bevmae/decoder.hpp"

#include <cmath>
#include <stdexcept>

namespace bevmae {
namespace {

constexpr int kTaps2d = 9;

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, SplitMix64& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

// (X * Y) x (9 * C) patch matrix.
Matrix im2col(const Matrix& map, int nx, int ny) {
  const Eigen::Index c = map.cols();
  Matrix col = Matrix::Zero(map.rows(), kTaps2d * c);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const Eigen::Index row = static_cast<Eigen::Index>(i) * ny + j;
      for (int t = 0; t < kTaps2d; ++t) {
        const int si = i + t / 3 - 1;
        const int sj = j + t % 3 - 1;
        if (si < 0 || sj < 0 || si >= nx || sj >= ny) continue;
        col.block(row, t * c, 1, c) = map.row(static_cast<Eigen::Index>(si) * ny + sj);
      }
    }
  }
  return col;
}

void col2im_add(const Matrix& col, int nx, int ny, Eigen::Index c, Matrix& map_grad) {
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const Eigen::Index row = static_cast<Eigen::Index>(i) * ny + j;
      for (int t = 0; t < kTaps2d; ++t) {
        const int si = i + t / 3 - 1;
        const int sj = j + t % 3 - 1;
        if (si < 0 || sj < 0 || si >= nx || sj >= ny) continue;
        map_grad.row(static_cast<Eigen::Index>(si) * ny + sj) += col.block(row, t * c, 1, c);
      }
    }
  }
}

void check_map(const Matrix& map, int nx, int ny, const Matrix& weights) {
  if (map.rows() != static_cast<Eigen::Index>(nx) * ny) throw std::invalid_argument("conv2d_3x3: map rows != X * Y");
  if (weights.rows() != kTaps2d * map.cols()) throw std::invalid_argument("conv2d_3x3: weight rows != 9 * C_in");
}

}  // namespace

std::string to_string(DecoderKind kind) { return kind == DecoderKind::kConv3x3 ? "conv3x3" : "residual"; }

DecoderKind decoder_kind_from_string(const std::string& s) {
  if (s == "conv3x3") return DecoderKind::kConv3x3;
  if (s == "residual") return DecoderKind::kResidual;
  throw std::invalid_argument("unknown decoder kind '" + s + "'");
}

void init_decoder_params(ParameterSet& params, const DecoderConfig& config, int in_channels, SplitMix64& rng) {
  if (config.num_points < 1) throw std::invalid_argument("DecoderConfig: num_points must be positive");
  if (config.channels < 1) throw std::invalid_argument("DecoderConfig: channels must be positive");
  const int fan_in = kTaps2d * in_channels;
  params.add("decoder.conv.weight", uniform_matrix(fan_in, config.channels, std::sqrt(6.0 / fan_in), rng));
  params.add("decoder.conv.bias", uniform_matrix(1, config.channels, 1.0 / std::sqrt(double(fan_in)), rng));
  if (config.kind == DecoderKind::kResidual) {
    const int fan2 = kTaps2d * config.channels;
    params.add("decoder.conv2.weight", uniform_matrix(fan2, config.channels, std::sqrt(6.0 / fan2), rng));
    params.add("decoder.conv2.bias", uniform_matrix(1, config.channels, 1.0 / std::sqrt(double(fan2)), rng));
  }
  // Linear heads: Kaiming-uniform with unit gain.
  const double head_bound = std::sqrt(3.0 / config.channels);
  const double bias_bound = 1.0 / std::sqrt(double(config.channels));
  params.add("head.coord.weight", uniform_matrix(config.channels, 3 * config.num_points, head_bound, rng));
  params.add("head.coord.bias", uniform_matrix(1, 3 * config.num_points, bias_bound, rng));
  params.add("head.density.weight", uniform_matrix(config.channels, 1, head_bound, rng));
  params.add("head.density.bias", uniform_matrix(1, 1, bias_bound, rng));
}

Matrix conv2d_3x3_forward(const Matrix& map, int nx, int ny, const Matrix& weights) {
  check_map(map, nx, ny, weights);
  return im2col(map, nx, ny) * weights;
}

Var conv2d_3x3(const Var& map, int nx, int ny, const Var& weights) {
  check_map(map.value(), nx, ny, weights.value());
  Tape& tape = map.tape();
  Matrix col = im2col(map.value(), nx, ny);
  Matrix out = col * weights.value();
  const Var inputs[] = {map, weights};
  return tape.record(std::move(out), inputs, [&tape, map, weights, nx, ny, col = std::move(col)](const Matrix& g) {
    if (tape.requires_grad(weights)) tape.grad_slot(weights).noalias() += col.transpose() * g;
    if (tape.requires_grad(map)) {
      const Matrix g_col = g * weights.value().transpose();
      col2im_add(g_col, nx, ny, map.cols(), tape.grad_slot(map));
    }
  });
}

Var decode(const Var& bev, int nx, int ny, const DecoderConfig& config, const BoundParams& params) {
  Var h = add_row_bias(conv2d_3x3(bev, nx, ny, params["decoder.conv.weight"]), params["decoder.conv.bias"]);
  if (config.kind == DecoderKind::kResidual) {
    Var inner = add_row_bias(conv2d_3x3(relu(h), nx, ny, params["decoder.conv2.weight"]), params["decoder.conv2.bias"]);
    h = add(h, inner);
  }
  return config.relu ? relu(h) : h;
}

HeadOutputs predict_at(const Var& hidden, int nx, int ny, const MaskPlan& plan, const BoundParams& params) {
  if (hidden.rows() != static_cast<Eigen::Index>(nx) * ny) throw std::invalid_argument("predict_at: map size");
  HeadOutputs out;
  std::vector<std::size_t> rows;
  rows.reserve(plan.masked.size());
  for (const GridIndex& g : plan.masked) {
    if (g.i < 0 || g.j < 0 || g.i >= nx || g.j >= ny) throw std::out_of_range("predict_at: masked grid outside map");
    out.grids.push_back(g);
    rows.push_back(static_cast<std::size_t>(g.i) * static_cast<std::size_t>(ny) + static_cast<std::size_t>(g.j));
  }
  const Var gathered = gather_rows(hidden, std::move(rows));
  out.coords = add_row_bias(matmul(gathered, params["head.coord.weight"]), params["head.coord.bias"]);
  out.density = add_row_bias(matmul(gathered, params["head.density.weight"]), params["head.density.bias"]);
  return out;
}

GridPredictions to_predictions(const HeadOutputs& heads) {
  GridPredictions preds;
  const Matrix& coords = heads.coords.value();
  const Matrix& density = heads.density.value();
  const Eigen::Index points = coords.cols() / 3;
  for (std::size_t r = 0; r < heads.grids.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    GridPrediction p;
    p.coords = Eigen::Map<const Matrix>(coords.row(row).data(), points, 3);
    p.density = density(row, 0);
    preds.grids.emplace(heads.grids[r], std::move(p));
  }
  return preds;
}

}  // namespace bevmae
