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

#include "bevmae/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "bevmae/random.hpp"

namespace bevmae {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("config: '" + key + "' expects a number, got '" + s + "'");
  }
  return v;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& s) {
  Int v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("config: '" + key + "' expects an integer, got '" + s + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("config: '" + key + "' expects true/false, got '" + s + "'");
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

template <std::size_t N>
std::string fmt_array(const std::array<double, N>& a) {
  std::string out;
  for (std::size_t k = 0; k < N; ++k) out += (k ? "," : "") + fmt(a[k]);
  return out;
}

template <std::size_t N>
std::array<double, N> parse_array(const std::string& key, const std::string& s) {
  const auto values = parse_double_list(s);
  if (values.size() != N) {
    throw std::invalid_argument("config: '" + key + "' expects " + std::to_string(N) + " comma-separated numbers");
  }
  std::array<double, N> out{};
  for (std::size_t k = 0; k < N; ++k) out[k] = values[k];
  return out;
}

struct Key {
  std::string name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define BEVMAE_DOUBLE(key, field)                                                          \
  Key {                                                                                    \
    key, [](const RunConfig& c) { return fmt(c.field); },                                  \
        [](RunConfig& c, const std::string& v) { c.field = parse_double(key, v); }         \
  }
#define BEVMAE_INT(key, field, type)                                                       \
  Key {                                                                                    \
    key, [](const RunConfig& c) { return std::to_string(c.field); },                       \
        [](RunConfig& c, const std::string& v) { c.field = parse_int<type>(key, v); }      \
  }
#define BEVMAE_BOOL(key, field)                                                            \
  Key {                                                                                    \
    key, [](const RunConfig& c) { return fmt_bool(c.field); },                             \
        [](RunConfig& c, const std::string& v) { c.field = parse_bool(key, v); }           \
  }
#define BEVMAE_ARRAY(key, field, n)                                                        \
  Key {                                                                                    \
    key, [](const RunConfig& c) { return fmt_array(c.field); },                            \
        [](RunConfig& c, const std::string& v) { c.field = parse_array<n>(key, v); }       \
  }

const std::vector<Key>& key_table() {
  static const std::vector<Key> table = {
      BEVMAE_DOUBLE("grid.x_min", model.grid.x_min),
      BEVMAE_DOUBLE("grid.x_max", model.grid.x_max),
      BEVMAE_DOUBLE("grid.y_min", model.grid.y_min),
      BEVMAE_DOUBLE("grid.y_max", model.grid.y_max),
      BEVMAE_DOUBLE("grid.z_min", model.grid.z_min),
      BEVMAE_DOUBLE("grid.z_max", model.grid.z_max),
      BEVMAE_ARRAY("grid.voxel_size", model.grid.voxel_size, 3),
      BEVMAE_INT("grid.downsample", model.grid.downsample, int),
      Key{"encoder.layers", [](const RunConfig& c) { return c.model.encoder.describe(); },
          [](RunConfig& c, const std::string& v) { c.model.encoder = EncoderConfig::parse(v, c.model.encoder.relu); }},
      BEVMAE_BOOL("encoder.relu", model.encoder.relu),
      Key{"decoder.kind", [](const RunConfig& c) { return to_string(c.model.decoder.kind); },
          [](RunConfig& c, const std::string& v) { c.model.decoder.kind = decoder_kind_from_string(v); }},
      BEVMAE_INT("decoder.channels", model.decoder.channels, int),
      BEVMAE_INT("decoder.num_points", model.decoder.num_points, int),
      BEVMAE_BOOL("decoder.relu", model.decoder.relu),
      BEVMAE_DOUBLE("loss.lambda_d", model.loss.lambda_d),
      BEVMAE_DOUBLE("loss.beta", model.loss.beta),
      BEVMAE_DOUBLE("loss.density_scale", model.loss.density_scale),
      BEVMAE_BOOL("loss.density_log", model.loss.density_log),
      BEVMAE_DOUBLE("mask_ratio", mask_ratio),
      BEVMAE_DOUBLE("optim.max_lr", schedule.max_lr),
      BEVMAE_DOUBLE("optim.pct_start", schedule.pct_start),
      BEVMAE_DOUBLE("optim.div_factor", schedule.div_factor),
      BEVMAE_DOUBLE("optim.final_div_factor", schedule.final_div_factor),
      BEVMAE_DOUBLE("optim.beta1", adam.beta1),
      BEVMAE_DOUBLE("optim.beta2", adam.beta2),
      BEVMAE_DOUBLE("optim.eps", adam.eps),
      BEVMAE_INT("steps", steps, std::int64_t),
      BEVMAE_INT("batch_size", batch_size, int),
      BEVMAE_INT("seed", seed, std::uint64_t),
      Key{"out_dir", [](const RunConfig& c) { return c.out_dir; },
          [](RunConfig& c, const std::string& v) { c.out_dir = v; }},
      BEVMAE_INT("checkpoint_every", checkpoint_every, std::int64_t),
      Key{"data.source",
          [](const RunConfig& c) { return std::string(c.data_source == DataSource::kSynthetic ? "synthetic" : "files"); },
          [](RunConfig& c, const std::string& v) {
            if (v == "synthetic") {
              c.data_source = DataSource::kSynthetic;
            } else if (v == "files") {
              c.data_source = DataSource::kFiles;
            } else {
              throw std::invalid_argument("config: data.source must be 'synthetic' or 'files'");
            }
          }},
      Key{"data.glob", [](const RunConfig& c) { return c.data_glob; },
          [](RunConfig& c, const std::string& v) { c.data_glob = v; }},
      BEVMAE_INT("data.num_scenes", num_scenes, std::size_t),
      BEVMAE_INT("scene.n_objects", scene.n_objects, std::size_t),
      BEVMAE_ARRAY("scene.object_length", scene.object_length, 2),
      BEVMAE_ARRAY("scene.object_width", scene.object_width, 2),
      BEVMAE_ARRAY("scene.object_height", scene.object_height, 2),
      BEVMAE_DOUBLE("scene.min_object_range", scene.min_object_range),
      BEVMAE_DOUBLE("scene.ground_z", scene.ground_z),
      BEVMAE_ARRAY("scene.sensor", scene.sensor, 3),
      BEVMAE_INT("scene.points_budget", scene.points_budget, std::size_t),
      BEVMAE_DOUBLE("scene.falloff_alpha", scene.falloff_alpha),
      BEVMAE_DOUBLE("scene.falloff_r0", scene.falloff_r0),
      BEVMAE_DOUBLE("scene.noise_sigma", scene.noise_sigma),
  };
  return table;
}

#undef BEVMAE_DOUBLE
#undef BEVMAE_INT
#undef BEVMAE_BOOL
#undef BEVMAE_ARRAY

const Key& find_key(const std::string& name) {
  for (const Key& k : key_table()) {
    if (k.name == name) return k;
  }
  throw std::invalid_argument("config: unknown key '" + name + "'");
}

bool is_model_key(const std::string& name, bool encoder_only) {
  if (name.rfind("grid.", 0) == 0 || name.rfind("encoder.", 0) == 0) return true;
  if (encoder_only) return false;
  return name.rfind("decoder.", 0) == 0 || name.rfind("loss.", 0) == 0;
}

void apply_text(RunConfig& cfg, const std::string& text, bool model_only) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (model_only && !is_model_key(key, false)) {
      throw std::invalid_argument("model descriptor: unexpected key '" + key + "'");
    }
    cfg.set(key, trim(line.substr(eq + 1)));
  }
}

}  // namespace

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_double("list", trim(item)));
  return out;
}

void RunConfig::set(const std::string& key, const std::string& value) { find_key(key).set(*this, value); }

std::string RunConfig::get(const std::string& key) const { return find_key(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const Key& k : key_table()) out.push_back(k.name);
    return out;
  }();
  return names;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const Key& k : key_table()) out += k.name + " = " + k.get(*this) + "\n";
  return out;
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig cfg;
  apply_text(cfg, text, false);
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

void RunConfig::validate() const {
  model.validate();
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw std::invalid_argument("config: mask_ratio must lie in (0, 1)");
  if (!(schedule.max_lr > 0.0)) throw std::invalid_argument("config: optim.max_lr must be positive");
  if (!(schedule.pct_start >= 0.0 && schedule.pct_start < 1.0)) {
    throw std::invalid_argument("config: optim.pct_start must lie in [0, 1)");
  }
  if (!(schedule.div_factor > 0.0) || !(schedule.final_div_factor > 0.0)) {
    throw std::invalid_argument("config: optim div factors must be positive");
  }
  if (steps < 0) throw std::invalid_argument("config: steps must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (checkpoint_every < 0) throw std::invalid_argument("config: checkpoint_every must be >= 0");
  if (data_source == DataSource::kSynthetic) {
    if (num_scenes < 1) throw std::invalid_argument("config: data.num_scenes must be >= 1");
    scene_config(0).validate();
  } else if (data_glob.empty()) {
    throw std::invalid_argument("config: data.glob is required when data.source = files");
  }
}

SceneConfig RunConfig::scene_config(std::size_t index) const {
  SceneConfig cfg = scene;
  cfg.x_min = model.grid.x_min;
  cfg.x_max = model.grid.x_max;
  cfg.y_min = model.grid.y_min;
  cfg.y_max = model.grid.y_max;
  cfg.z_min = model.grid.z_min;
  cfg.z_max = model.grid.z_max;
  cfg.seed = derive_seed(seed, 0x5ce9e, index);
  return cfg;
}

std::string model_descriptor(const ModelConfig& model, bool encoder_only) {
  RunConfig tmp;
  tmp.model = model;
  std::string out;
  for (const Key& k : key_table()) {
    if (is_model_key(k.name, encoder_only)) out += k.name + " = " + k.get(tmp) + "\n";
  }
  return out;
}

ModelConfig parse_model_descriptor(const std::string& text) {
  RunConfig tmp;
  apply_text(tmp, text, true);
  return tmp.model;
}

}  // namespace bevmae
