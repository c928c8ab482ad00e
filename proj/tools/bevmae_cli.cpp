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

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bevmae/checkpoint.hpp"
#include "bevmae/config.hpp"
#include "bevmae/io.hpp"
#include "bevmae/pipeline.hpp"
#include "bevmae/synthetic.hpp"

namespace {

using namespace bevmae;

struct Overrides {
  std::string config_path;
  std::optional<double> mask_ratio;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> steps;
  std::optional<std::string> out;
  std::vector<std::string> sets;
};

void add_run_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "Run config file (key = value lines)");
  cmd->add_option("--mask-ratio", o.mask_ratio, "Fraction of non-empty BEV grids to mask")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--seed", o.seed, "Run seed");
  cmd->add_option("--steps", o.steps, "Optimizer steps")->check(CLI::NonNegativeNumber);
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--set", o.sets, "Extra key=value config override (repeatable)");
}

RunConfig resolve(const Overrides& o) {
  RunConfig cfg = o.config_path.empty() ? RunConfig{} : RunConfig::load(o.config_path);
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.mask_ratio) cfg.mask_ratio = *o.mask_ratio;
  if (o.seed) cfg.seed = *o.seed;
  if (o.steps) cfg.steps = *o.steps;
  if (o.out) cfg.out_dir = *o.out;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BEV-guided masked autoencoder pretraining for LiDAR point clouds"};
  app.require_subcommand(1);

  Overrides pre;
  bool quiet = false;
  auto* pretrain_cmd = app.add_subcommand("pretrain", "Run masked pretraining");
  add_run_options(pretrain_cmd, pre);
  pretrain_cmd->add_flag("--quiet", quiet, "Do not echo metrics to stdout");

  Overrides sw;
  std::string ratios_text = "0.5,0.6,0.7,0.8";
  auto* sweep_cmd = app.add_subcommand("sweep", "Pretrain once per masking ratio and compare final losses");
  add_run_options(sweep_cmd, sw);
  sweep_cmd->add_option("--ratios", ratios_text, "Comma-separated masking ratios");

  std::string ckpt_in;
  std::string ckpt_out;
  auto* export_cmd = app.add_subcommand("export-encoder", "Strip decoder, heads, token and optimizer state");
  export_cmd->add_option("checkpoint", ckpt_in, "Full checkpoint")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--out", ckpt_out, "Output path (default <checkpoint>.encoder.bvma)");

  GradCheckSetup gc;
  double gc_tol = 1e-5;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
  grad_cmd->add_option("--points", gc.num_points, "Scene size");
  grad_cmd->add_option("--components", gc.options.max_components, "Components sampled per tensor (0 = all)");
  grad_cmd->add_option("--step", gc.options.step, "Finite-difference step");
  grad_cmd->add_option("--seed", gc.seed, "Scene / init seed");
  grad_cmd->add_option("--tol", gc_tol, "Relative error tolerance");

  std::size_t gen_n = 8;
  std::string gen_out;
  Overrides gen;
  auto* gen_cmd = app.add_subcommand("gen-scenes", "Write synthetic scenes as .bin files");
  gen_cmd->add_option("--n", gen_n, "Number of scenes")->required();
  gen_cmd->add_option("--out", gen_out, "Output directory")->required();
  gen_cmd->add_option("--config", gen.config_path, "Run config supplying grid and scene settings");
  gen_cmd->add_option("--seed", gen.seed, "Run seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*pretrain_cmd) {
      const RunConfig cfg = resolve(pre);
      PretrainOptions opts;
      if (!quiet) opts.metrics_stream = &std::cout;
      const auto t0 = std::chrono::steady_clock::now();
      const PretrainResult res = pretrain(cfg, opts);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::fprintf(stderr, "pretrain: %lld steps in %.1f s, checkpoint %s\n", static_cast<long long>(res.checkpoint.step),
                   secs, (std::filesystem::path(cfg.out_dir) / "checkpoint.bvma").string().c_str());
    } else if (*sweep_cmd) {
      const RunConfig cfg = resolve(sw);
      PretrainOptions opts;
      const auto rows = sweep_mask_ratio(cfg, parse_double_list(ratios_text), opts);
      std::cout << format_sweep_table(rows);
    } else if (*export_cmd) {
      if (ckpt_out.empty()) {
        std::filesystem::path p(ckpt_in);
        p.replace_extension(".encoder.bvma");
        ckpt_out = p.string();
      }
      const Checkpoint full = load_checkpoint(ckpt_in);
      save_checkpoint(export_encoder(full), ckpt_out);
      std::printf("%s: %zu encoder tensors (%zu scalars)\n", ckpt_out.c_str(), export_encoder(full).params.size(),
                  export_encoder(full).params.scalar_count());
    } else if (*grad_cmd) {
      const GradCheckReport report = run_model_gradcheck(gc);
      std::cout << report.to_string();
      const bool ok = report.passed(gc_tol);
      std::printf("gradcheck: max relative error %.3e (tolerance %.1e): %s\n", report.max_rel_error(), gc_tol,
                  ok ? "PASS" : "FAIL");
      return ok ? 0 : 1;
    } else if (*gen_cmd) {
      const RunConfig cfg = resolve(gen);
      std::filesystem::create_directories(gen_out);
      for (std::size_t k = 0; k < gen_n; ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "scene_%04zu.bin", k);
        const PointCloud cloud = generate_scene(cfg.scene_config(k));
        save_bin_cloud(cloud, std::filesystem::path(gen_out) / name);
        std::printf("%s: %zu points\n", name, cloud.size());
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
