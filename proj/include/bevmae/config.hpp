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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bevmae/model.hpp"
#include "bevmae/optim.hpp"
#include "bevmae/synthetic.hpp"

namespace bevmae {

enum class DataSource { kSynthetic, kFiles };

// Everything a pretraining run depends on. The text form is a flat
// `key = value` file; `#` starts a comment. See README for the key list.
struct RunConfig {
  ModelConfig model;
  double mask_ratio = 0.7;
  OneCycleConfig schedule;
  AdamConfig adam;
  std::int64_t steps = 400;
  int batch_size = 2;
  std::uint64_t seed = 0;
  std::string out_dir = "runs/default";
  std::int64_t checkpoint_every = 100;

  DataSource data_source = DataSource::kSynthetic;
  std::string data_glob;
  std::size_t num_scenes = 64;
  // Extent and z window always follow model.grid.
  SceneConfig scene;

  void validate() const;

  // Applies one `key = value` assignment; throws on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  std::string to_text() const;
  static RunConfig from_text(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);

  // Synthetic scene config for scene `index`, extent taken from the grid.
  SceneConfig scene_config(std::size_t index) const;

  bool operator==(const RunConfig&) const = default;
};

// Model-only subset of the key/value form, used as the checkpoint descriptor.
// `encoder_only` omits the decoder and loss keys.
std::string model_descriptor(const ModelConfig& model, bool encoder_only = false);
ModelConfig parse_model_descriptor(const std::string& text);

// Parses "a,b,c" into doubles.
std::vector<double> parse_double_list(const std::string& text);

}  // namespace bevmae
