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

#include "bevmae/encoder.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace bevmae {

EncoderConfig EncoderConfig::default_stack(int in_channels) {
  EncoderConfig cfg;
  cfg.layers = {
      {ConvKind::kSubmanifold, in_channels, 16, {1, 1, 1}},
      {ConvKind::kRegular, 16, 32, {2, 2, 2}},
      {ConvKind::kRegular, 32, 64, {2, 2, 2}},
      {ConvKind::kRegular, 64, 64, {2, 2, 3}},
  };
  return cfg;
}

int EncoderConfig::input_channels() const {
  if (layers.empty()) throw std::logic_error("EncoderConfig: no layers");
  return layers.front().in_channels;
}

int EncoderConfig::output_channels() const {
  if (layers.empty()) throw std::logic_error("EncoderConfig: no layers");
  return layers.back().out_channels;
}

void EncoderConfig::validate(const GridSpec& grid) const {
  grid.validate();
  if (layers.empty()) throw std::invalid_argument("EncoderConfig: no layers");
  std::array<int, 3> extent{grid.voxels_x(), grid.voxels_y(), grid.voxels_z()};
  int stride_x = 1;
  int stride_y = 1;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const SparseConvLayer& l = layers[k];
    if (l.in_channels < 1 || l.out_channels < 1) throw std::invalid_argument("EncoderConfig: empty channel count");
    if (k > 0 && l.in_channels != layers[k - 1].out_channels) {
      throw std::invalid_argument("EncoderConfig: layer " + std::to_string(k) + " input channels do not chain");
    }
    if (l.kind == ConvKind::kSubmanifold && l.stride != std::array<int, 3>{1, 1, 1}) {
      throw std::invalid_argument("EncoderConfig: submanifold layers must have unit stride");
    }
    stride_x *= l.stride[0];
    stride_y *= l.stride[1];
    extent = conv_output_extent(extent, l.stride);
  }
  if (stride_x != grid.downsample || stride_y != grid.downsample) {
    throw std::invalid_argument("EncoderConfig: x/y stride products must equal the downsample ratio");
  }
  if (extent[0] != grid.grids_x() || extent[1] != grid.grids_y()) {
    throw std::invalid_argument("EncoderConfig: output extent does not match the BEV plane");
  }
  if (extent[2] != 1) throw std::invalid_argument("EncoderConfig: z is not collapsed to a single bin");
}

std::string EncoderConfig::describe() const {
  std::ostringstream out;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (k) out << ',';
    out << to_string(l.kind) << ':' << l.in_channels << ':' << l.out_channels << ':' << l.stride[0] << 'x'
        << l.stride[1] << 'x' << l.stride[2];
  }
  return out.str();
}

EncoderConfig EncoderConfig::parse(const std::string& text, bool relu) {
  EncoderConfig cfg;
  cfg.relu = relu;
  std::istringstream layers(text);
  std::string item;
  while (std::getline(layers, item, ',')) {
    std::istringstream fields(item);
    std::string kind, cin, cout, stride;
    if (!std::getline(fields, kind, ':') || !std::getline(fields, cin, ':') || !std::getline(fields, cout, ':') ||
        !std::getline(fields, stride)) {
      throw std::invalid_argument("EncoderConfig::parse: malformed layer '" + item + "'");
    }
    SparseConvLayer l;
    l.kind = conv_kind_from_string(kind);
    l.in_channels = std::stoi(cin);
    l.out_channels = std::stoi(cout);
    char x1 = 0, x2 = 0;
    std::istringstream s(stride);
    if (!(s >> l.stride[0] >> x1 >> l.stride[1] >> x2 >> l.stride[2]) || x1 != 'x' || x2 != 'x') {
      throw std::invalid_argument("EncoderConfig::parse: malformed stride '" + stride + "'");
    }
    cfg.layers.push_back(l);
  }
  if (cfg.layers.empty()) throw std::invalid_argument("EncoderConfig::parse: no layers");
  return cfg;
}

std::string encoder_weight_name(std::size_t layer) { return "encoder.conv" + std::to_string(layer) + ".weight"; }
std::string encoder_bias_name(std::size_t layer) { return "encoder.conv" + std::to_string(layer) + ".bias"; }

void init_encoder_params(ParameterSet& params, const EncoderConfig& config, SplitMix64& rng) {
  for (std::size_t k = 0; k < config.layers.size(); ++k) {
    const auto& l = config.layers[k];
    const int fan_in = kKernelTaps * l.in_channels;
    const double w_bound = std::sqrt(6.0 / fan_in);
    const double b_bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix w(fan_in, l.out_channels);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-w_bound, w_bound);
    Matrix b(1, l.out_channels);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.uniform(-b_bound, b_bound);
    params.add(encoder_weight_name(k), std::move(w));
    params.add(encoder_bias_name(k), std::move(b));
  }
  Matrix token(1, config.input_channels());
  for (Eigen::Index i = 0; i < token.size(); ++i) token.data()[i] = 0.02 * rng.normal();
  params.add(kTokenName, std::move(token));
}

EncoderPlan plan_encoder(const std::vector<VoxelIndex>& sites, const std::array<int, 3>& extent,
                         const EncoderConfig& config) {
  EncoderPlan plan;
  plan.input_sites = sites;
  plan.input_extent = extent;
  const std::vector<VoxelIndex>* current = &sites;
  std::array<int, 3> current_extent = extent;
  plan.layers.reserve(config.layers.size());
  for (const auto& layer : config.layers) {
    plan.layers.push_back(build_rulebook(*current, current_extent, layer));
    current = &plan.layers.back().out_sites;
    current_extent = plan.layers.back().out_extent;
  }
  return plan;
}

std::vector<std::vector<VoxelIndex>> layer_site_patterns(const EncoderPlan& plan) {
  std::vector<std::vector<VoxelIndex>> out;
  out.reserve(plan.layers.size());
  for (const auto& rb : plan.layers) out.push_back(rb.out_sites);
  return out;
}

std::vector<bool> masked_site_rows(const SparseTensor& full, const MaskPlan& plan, int downsample) {
  std::vector<bool> masked(full.sites.size(), false);
  for (std::size_t r = 0; r < full.sites.size(); ++r) {
    const GridIndex g = grid_of_voxel(full.sites[r], downsample);
    if (plan.is_masked(g)) {
      masked[r] = true;
    } else if (!plan.visible.count(g)) {
      throw std::invalid_argument("substitute_token: site lies in a grid outside the mask plan");
    }
  }
  return masked;
}

SparseTensor substitute_token(const SparseTensor& full, const SparseTensor& visible, const MaskPlan& plan,
                              const RowVector& token, int downsample) {
  if (token.cols() != full.channels()) throw std::invalid_argument("substitute_token: token width mismatch");
  const std::vector<bool> masked = masked_site_rows(full, plan, downsample);
  SparseTensor out;
  out.sites = full.sites;
  out.extent = full.extent;
  out.features.resize(full.features.rows(), full.features.cols());
  for (std::size_t r = 0; r < full.sites.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    if (masked[r]) {
      out.features.row(row) = token;
      continue;
    }
    const std::ptrdiff_t v = visible.find(full.sites[r]);
    if (v < 0) throw std::invalid_argument("substitute_token: visible site missing from the visible features");
    out.features.row(row) = visible.features.row(v);
  }
  return out;
}

Var substitute_token(const Matrix& base, const std::vector<bool>& masked_rows, const Var& token) {
  if (static_cast<std::size_t>(base.rows()) != masked_rows.size() || token.rows() != 1 ||
      token.cols() != base.cols()) {
    throw std::invalid_argument("substitute_token: shape mismatch");
  }
  Tape& tape = token.tape();
  Matrix out = base;
  for (std::size_t r = 0; r < masked_rows.size(); ++r) {
    if (masked_rows[r]) out.row(static_cast<Eigen::Index>(r)) = token.value().row(0);
  }
  const Var inputs[] = {token};
  return tape.record(std::move(out), inputs, [&tape, token, masked_rows](const Matrix& g) {
    Matrix& slot = tape.grad_slot(token);
    for (std::size_t r = 0; r < masked_rows.size(); ++r) {
      if (masked_rows[r]) slot.row(0) += g.row(static_cast<Eigen::Index>(r));
    }
  });
}

namespace {

std::vector<std::size_t> bev_targets(const std::vector<VoxelIndex>& sites, const std::array<int, 3>& extent,
                                     Eigen::Index channels) {
  std::vector<std::size_t> offsets(sites.size());
  for (std::size_t r = 0; r < sites.size(); ++r) {
    const auto& s = sites[r];
    const std::size_t cell = static_cast<std::size_t>(s.ix) * static_cast<std::size_t>(extent[1]) +
                             static_cast<std::size_t>(s.iy);
    const std::size_t width = static_cast<std::size_t>(extent[2]) * static_cast<std::size_t>(channels);
    offsets[r] = cell * width + static_cast<std::size_t>(s.iz) * static_cast<std::size_t>(channels);
  }
  return offsets;
}

}  // namespace

Matrix bev_flatten(const SparseTensor& input) {
  const Eigen::Index c = input.features.cols();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(input.extent[0]) * input.extent[1],
                            static_cast<Eigen::Index>(input.extent[2]) * c);
  const auto offsets = bev_targets(input.sites, input.extent, c);
  for (std::size_t r = 0; r < offsets.size(); ++r) {
    for (Eigen::Index k = 0; k < c; ++k) {
      out.data()[offsets[r] + static_cast<std::size_t>(k)] = input.features(static_cast<Eigen::Index>(r), k);
    }
  }
  return out;
}

Var bev_flatten(const Var& features, const std::vector<VoxelIndex>& sites, const std::array<int, 3>& extent) {
  if (static_cast<std::size_t>(features.rows()) != sites.size()) {
    throw std::invalid_argument("bev_flatten: feature rows do not match sites");
  }
  Tape& tape = features.tape();
  const Eigen::Index c = features.cols();
  const auto offsets = bev_targets(sites, extent, c);
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(extent[0]) * extent[1], static_cast<Eigen::Index>(extent[2]) * c);
  const Matrix& x = features.value();
  for (std::size_t r = 0; r < offsets.size(); ++r) {
    for (Eigen::Index k = 0; k < c; ++k) out.data()[offsets[r] + static_cast<std::size_t>(k)] = x(static_cast<Eigen::Index>(r), k);
  }
  const Var inputs[] = {features};
  return tape.record(std::move(out), inputs, [&tape, features, offsets, c](const Matrix& g) {
    Matrix& slot = tape.grad_slot(features);
    for (std::size_t r = 0; r < offsets.size(); ++r) {
      for (Eigen::Index k = 0; k < c; ++k) slot(static_cast<Eigen::Index>(r), k) += g.data()[offsets[r] + static_cast<std::size_t>(k)];
    }
  });
}

Var run_encoder(const Var& input_features, const EncoderPlan& plan, const EncoderConfig& config,
                const BoundParams& params) {
  if (plan.layers.size() != config.layers.size()) throw std::invalid_argument("run_encoder: plan/config mismatch");
  Var x = input_features;
  for (std::size_t k = 0; k < config.layers.size(); ++k) {
    if (x.cols() != config.layers[k].in_channels) throw std::invalid_argument("run_encoder: channel mismatch");
    x = sparse_conv(x, params[encoder_weight_name(k)], plan.layers[k]);
    x = add_row_bias(x, params[encoder_bias_name(k)]);
    if (config.relu) x = relu(x);
  }
  return bev_flatten(x, plan.output_sites(), plan.output_extent());
}

}  // namespace bevmae
