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

#include "bevmae/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace bevmae {
namespace {

struct NearestPairs {
  std::vector<Eigen::Index> pred_to_target;  // per predicted point
  std::vector<Eigen::Index> target_to_pred;  // per target point
  double value = 0.0;
};

// Strict comparison keeps the lowest index on ties.
NearestPairs nearest_pairs(const Matrix& pred, const Matrix& target) {
  const Eigen::Index l = pred.rows();
  const Eigen::Index n = target.rows();
  NearestPairs out;
  out.pred_to_target.assign(static_cast<std::size_t>(l), 0);
  out.target_to_pred.assign(static_cast<std::size_t>(n), 0);
  std::vector<double> best_target(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  double term_pred = 0.0;
  for (Eigen::Index a = 0; a < l; ++a) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index b = 0; b < n; ++b) {
      const double dx = pred(a, 0) - target(b, 0);
      const double dy = pred(a, 1) - target(b, 1);
      const double dz = pred(a, 2) - target(b, 2);
      const double d = dx * dx + dy * dy + dz * dz;
      if (d < best) {
        best = d;
        out.pred_to_target[static_cast<std::size_t>(a)] = b;
      }
      if (d < best_target[static_cast<std::size_t>(b)]) {
        best_target[static_cast<std::size_t>(b)] = d;
        out.target_to_pred[static_cast<std::size_t>(b)] = a;
      }
    }
    term_pred += best;
  }
  double term_target = 0.0;
  for (double d : best_target) term_target += d;
  out.value = term_pred / static_cast<double>(l) + term_target / static_cast<double>(n);
  return out;
}

// Chamfer value with the nearest-neighbour assignment held fixed.
double assigned_value(const Matrix& pred, const Matrix& target, const NearestPairs& pairs) {
  double term_pred = 0.0;
  for (Eigen::Index a = 0; a < pred.rows(); ++a) {
    term_pred += (pred.row(a) - target.row(pairs.pred_to_target[static_cast<std::size_t>(a)])).squaredNorm();
  }
  double term_target = 0.0;
  for (Eigen::Index b = 0; b < target.rows(); ++b) {
    term_target += (pred.row(pairs.target_to_pred[static_cast<std::size_t>(b)]) - target.row(b)).squaredNorm();
  }
  return term_pred / static_cast<double>(pred.rows()) + term_target / static_cast<double>(target.rows());
}

void require_sets(const Matrix& pred, const Matrix& target) {
  if (pred.rows() < 1 || target.rows() < 1) throw std::invalid_argument("chamfer: empty point set");
  if (pred.cols() != 3 || target.cols() != 3) throw std::invalid_argument("chamfer: sets must be K x 3");
}

template <typename Fn>
double mean_over_grids(const GridPredictions& preds, const GridTargets& targets, Fn per_grid) {
  if (preds.grids.size() != targets.grids.size()) throw std::invalid_argument("loss: grid key sets differ");
  if (preds.grids.empty()) throw std::invalid_argument("loss: no masked grids");
  double acc = 0.0;
  for (const auto& [g, p] : preds.grids) {
    const auto it = targets.grids.find(g);
    if (it == targets.grids.end()) throw std::invalid_argument("loss: grid key sets differ");
    acc += per_grid(p, it->second);
  }
  return acc / static_cast<double>(preds.grids.size());
}

}  // namespace

Matrix normalized_offsets(std::span<const Point> points, GridIndex grid, const GridSpec& spec) {
  const auto center = spec.grid_center(grid);
  const double z_mid = 0.5 * (spec.z_min + spec.z_max);
  const double z_extent = spec.z_max - spec.z_min;
  Matrix out(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    out(r, 0) = (points[k].x - center[0]) / spec.grid_edge_x();
    out(r, 1) = (points[k].y - center[1]) / spec.grid_edge_y();
    out(r, 2) = (points[k].z - z_mid) / z_extent;
  }
  return out;
}

Point denormalize_offset(double ox, double oy, double oz, GridIndex grid, const GridSpec& spec) {
  const auto center = spec.grid_center(grid);
  return {center[0] + ox * spec.grid_edge_x(), center[1] + oy * spec.grid_edge_y(),
          0.5 * (spec.z_min + spec.z_max) + oz * (spec.z_max - spec.z_min), 0.0};
}

double density_target(std::span<const Point> points, GridIndex grid, const GridSpec& spec) {
  if (points.empty()) throw std::invalid_argument("density_target: empty grid");
  std::set<VoxelIndex> occupied;
  for (const Point& p : points) {
    const auto v = voxel_index_of(p, spec);
    if (!v || grid_of_voxel(*v, spec.downsample) != grid) {
      throw std::invalid_argument("density_target: point outside its grid");
    }
    occupied.insert(*v);
  }
  return static_cast<double>(points.size()) / (static_cast<double>(occupied.size()) * spec.voxel_volume());
}

double density_to_training_units(double raw_density, const LossConfig& config) {
  const double scaled = raw_density / config.density_scale;
  return config.density_log ? std::log1p(scaled) : scaled;
}

GridTargets build_targets(const CloudSplit& split, const GridSpec& spec, const LossConfig& config) {
  GridTargets targets;
  for (const auto& [g, pts] : split.masked_points_by_grid) {
    GridTarget t;
    t.offsets = normalized_offsets(pts, g, spec);
    t.density = density_to_training_units(density_target(pts, g, spec), config);
    targets.grids.emplace(g, std::move(t));
  }
  return targets;
}

double chamfer(const Matrix& pred, const Matrix& target) {
  require_sets(pred, target);
  return nearest_pairs(pred, target).value;
}

double smooth_l1(double x, double beta) {
  const double a = std::abs(x);
  return a < beta ? 0.5 * x * x / beta : a - 0.5 * beta;
}

double reconstruction_loss(const GridPredictions& preds, const GridTargets& targets) {
  return mean_over_grids(preds, targets,
                         [](const GridPrediction& p, const GridTarget& t) { return chamfer(p.coords, t.offsets); });
}

double density_loss(const GridPredictions& preds, const GridTargets& targets, double beta) {
  return mean_over_grids(preds, targets, [beta](const GridPrediction& p, const GridTarget& t) {
    return smooth_l1(p.density - t.density, beta);
  });
}

double total_loss(const GridPredictions& preds, const GridTargets& targets, const LossConfig& config) {
  if (config.lambda_d < 0.0) throw std::invalid_argument("total_loss: lambda_d must be non-negative");
  return reconstruction_loss(preds, targets) + config.lambda_d * density_loss(preds, targets, config.beta);
}

Var chamfer_loss(const Var& coords, std::vector<Matrix> targets) {
  const Matrix& x = coords.value();
  if (static_cast<std::size_t>(x.rows()) != targets.size() || x.rows() == 0) {
    throw std::invalid_argument("chamfer_loss: one target set per row required");
  }
  if (x.cols() % 3 != 0) throw std::invalid_argument("chamfer_loss: row width must be 3L");
  Tape& tape = coords.tape();
  const Eigen::Index points = x.cols() / 3;
  std::vector<NearestPairs> pairs;
  pairs.reserve(targets.size());
  double acc = 0.0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    const Matrix pred = Eigen::Map<const Matrix>(x.row(static_cast<Eigen::Index>(r)).data(), points, 3);
    require_sets(pred, targets[r]);
    NearestPairs np = nearest_pairs(pred, targets[r]);
    std::vector<std::int64_t> choice(np.pred_to_target.begin(), np.pred_to_target.end());
    choice.insert(choice.end(), np.target_to_pred.begin(), np.target_to_pred.end());
    choice = tape.decide(choice);
    if (!std::equal(choice.begin(), choice.begin() + points, np.pred_to_target.begin()) ||
        !std::equal(choice.begin() + points, choice.end(), np.target_to_pred.begin())) {
      np.pred_to_target.assign(choice.begin(), choice.begin() + points);
      np.target_to_pred.assign(choice.begin() + points, choice.end());
      np.value = assigned_value(pred, targets[r], np);
    }
    acc += np.value;
    pairs.push_back(std::move(np));
  }
  Matrix out(1, 1);
  out(0, 0) = acc / static_cast<double>(targets.size());
  const Var inputs[] = {coords};
  return tape.record(std::move(out), inputs,
                     [&tape, coords, points, targets = std::move(targets), pairs = std::move(pairs)](const Matrix& g) {
                       const Matrix& x = coords.value();
                       Matrix& slot = tape.grad_slot(coords);
                       const double scale = g(0, 0) / static_cast<double>(targets.size());
                       for (std::size_t r = 0; r < targets.size(); ++r) {
                         const auto row = static_cast<Eigen::Index>(r);
                         const Matrix& t = targets[r];
                         const double wl = 2.0 * scale / static_cast<double>(points);
                         const double wn = 2.0 * scale / static_cast<double>(t.rows());
                         for (Eigen::Index a = 0; a < points; ++a) {
                           const Eigen::Index b = pairs[r].pred_to_target[static_cast<std::size_t>(a)];
                           for (int c = 0; c < 3; ++c) slot(row, 3 * a + c) += wl * (x(row, 3 * a + c) - t(b, c));
                         }
                         for (Eigen::Index b = 0; b < t.rows(); ++b) {
                           const Eigen::Index a = pairs[r].target_to_pred[static_cast<std::size_t>(b)];
                           for (int c = 0; c < 3; ++c) slot(row, 3 * a + c) += wn * (x(row, 3 * a + c) - t(b, c));
                         }
                       }
                     });
}

Var density_loss(const Var& density, std::vector<double> targets, double beta) {
  const Matrix& x = density.value();
  if (x.cols() != 1 || static_cast<std::size_t>(x.rows()) != targets.size() || targets.empty()) {
    throw std::invalid_argument("density_loss: expected n x 1 predictions matching targets");
  }
  Tape& tape = density.tape();
  // Piece per row: -1 / +1 on the linear arms, 0 on the quadratic part.
  std::vector<std::int64_t> piece(targets.size());
  for (std::size_t r = 0; r < targets.size(); ++r) {
    const double diff = x(static_cast<Eigen::Index>(r), 0) - targets[r];
    piece[r] = std::abs(diff) < beta ? 0 : (diff > 0 ? 1 : -1);
  }
  piece = tape.decide(std::move(piece));
  double acc = 0.0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    const double diff = x(static_cast<Eigen::Index>(r), 0) - targets[r];
    acc += piece[r] == 0 ? 0.5 * diff * diff / beta : static_cast<double>(piece[r]) * diff - 0.5 * beta;
  }
  Matrix out(1, 1);
  out(0, 0) = acc / static_cast<double>(targets.size());
  const Var inputs[] = {density};
  return tape.record(std::move(out), inputs,
                     [&tape, density, targets = std::move(targets), beta, piece = std::move(piece)](const Matrix& g) {
                       Matrix& slot = tape.grad_slot(density);
                       const double scale = g(0, 0) / static_cast<double>(targets.size());
                       for (std::size_t r = 0; r < targets.size(); ++r) {
                         const auto row = static_cast<Eigen::Index>(r);
                         const double diff = density.value()(row, 0) - targets[r];
                         const double d = piece[r] == 0 ? diff / beta : static_cast<double>(piece[r]);
                         slot(row, 0) += scale * d;
                       }
                     });
}

}  // namespace bevmae
