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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bevmae/io.hpp"
#include "bevmae/pipeline.hpp"

namespace bevmae {
namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("bevmae_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

RunConfig tiny_run(const std::string& name) {
  RunConfig cfg;
  cfg.model = gradcheck_model_config();
  cfg.num_scenes = 4;
  cfg.scene.points_budget = 3000;
  cfg.scene.n_objects = 2;
  cfg.scene.object_length = {1.0, 2.0};
  cfg.scene.object_width = {0.8, 1.2};
  cfg.scene.min_object_range = 1.0;
  cfg.steps = 4;
  cfg.checkpoint_every = 2;
  cfg.seed = 5;
  cfg.out_dir = fresh_dir(name).string();
  return cfg;
}

std::vector<std::string> lines_of(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

TEST(Metrics, JsonLineRoundTrip) {
  const MetricsRecord r{7, 1.25, 1.0, 0.25, 3e-4};
  const std::string line = to_json_line(r);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  const MetricsRecord back = parse_metrics_line(line);
  EXPECT_EQ(back.step, 7);
  EXPECT_EQ(back.loss_total, 1.25);
  EXPECT_EQ(back.lr, 3e-4);
  for (const char* key : {"step", "loss_total", "loss_chamfer", "loss_density", "lr"}) {
    EXPECT_NE(line.find(std::string("\"") + key + "\""), std::string::npos);
  }
}

TEST(Pretrain, ZeroStepsWritesInitialCheckpointOnly) {
  RunConfig cfg = tiny_run("zero");
  cfg.steps = 0;
  const PretrainResult res = pretrain(cfg);
  EXPECT_TRUE(res.metrics.empty());
  const Checkpoint ckpt = load_checkpoint(std::filesystem::path(cfg.out_dir) / "checkpoint.bvma");
  EXPECT_EQ(ckpt.step, 0);
  EXPECT_TRUE(ckpt.params == res.checkpoint.params);
  EXPECT_TRUE(lines_of(std::filesystem::path(cfg.out_dir) / "metrics.jsonl").empty());
  EXPECT_EQ(RunConfig::load(std::filesystem::path(cfg.out_dir) / "run_config.txt"), cfg);
}

TEST(Pretrain, MetricsInvariantAndFiles) {
  RunConfig cfg = tiny_run("metrics");
  cfg.model.loss.lambda_d = 0.5;
  std::ostringstream stream;
  PretrainOptions opts;
  opts.metrics_stream = &stream;
  const PretrainResult res = pretrain(cfg, opts);
  ASSERT_EQ(res.metrics.size(), 4u);
  const auto lines = lines_of(std::filesystem::path(cfg.out_dir) / "metrics.jsonl");
  ASSERT_EQ(lines.size(), 4u);
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const MetricsRecord m = parse_metrics_line(lines[k]);
    EXPECT_EQ(m.step, static_cast<std::int64_t>(k + 1));
    EXPECT_NEAR(m.loss_total, m.loss_chamfer + 0.5 * m.loss_density, 1e-9);
    EXPECT_EQ(m.lr, one_cycle_lr(static_cast<std::int64_t>(k), 4, cfg.schedule));
    EXPECT_EQ(m.loss_total, res.metrics[k].loss_total);
  }
  EXPECT_EQ(stream.str(), lines[0] + "\n" + lines[1] + "\n" + lines[2] + "\n" + lines[3] + "\n");
  const Checkpoint ckpt = load_checkpoint(std::filesystem::path(cfg.out_dir) / "checkpoint.bvma");
  EXPECT_EQ(ckpt.step, 4);
  ASSERT_TRUE(ckpt.optim);
  EXPECT_EQ(ckpt.optim->step, 4);
  EXPECT_TRUE(ckpt.params == res.checkpoint.params);
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(cfg.out_dir) / "run_meta.json"));
}

TEST(Pretrain, DeterministicAcrossRuns) {
  RunConfig a = tiny_run("det_a");
  RunConfig b = tiny_run("det_b");
  PretrainOptions opts;
  opts.keep_mask_plans = true;
  const PretrainResult ra = pretrain(a, opts);
  const PretrainResult rb = pretrain(b, opts);
  EXPECT_EQ(ra.mask_plans, rb.mask_plans);
  EXPECT_EQ(ra.mask_plans.size(), 8u);
  EXPECT_EQ(read_file_bytes(std::filesystem::path(a.out_dir) / "checkpoint.bvma"),
            read_file_bytes(std::filesystem::path(b.out_dir) / "checkpoint.bvma"));
  EXPECT_EQ(lines_of(std::filesystem::path(a.out_dir) / "metrics.jsonl"),
            lines_of(std::filesystem::path(b.out_dir) / "metrics.jsonl"));
  // Masks are resampled every step.
  EXPECT_NE(ra.mask_plans[0].seed, ra.mask_plans[2].seed);
}

TEST(Pretrain, DivergenceKeepsLastGoodCheckpoint) {
  RunConfig cfg = tiny_run("nan");
  cfg.schedule.max_lr = 1e300;
  cfg.schedule.div_factor = 1.0;
  cfg.steps = 50;
  cfg.checkpoint_every = 0;
  EXPECT_THROW(pretrain(cfg), std::runtime_error);
  const auto path = std::filesystem::path(cfg.out_dir) / "checkpoint.bvma";
  const Checkpoint ckpt = load_checkpoint(path);
  EXPECT_EQ(ckpt.step, 0);
  for (const auto& p : ckpt.params.entries()) EXPECT_TRUE(p.value.allFinite());
  EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
}

TEST(Pretrain, ReadsBinFiles) {
  RunConfig gen = tiny_run("files_src");
  const auto clouds = load_training_clouds(gen);
  std::filesystem::create_directories(gen.out_dir);
  for (std::size_t k = 0; k < clouds.size(); ++k) {
    save_bin_cloud(clouds[k], std::filesystem::path(gen.out_dir) / ("scan_" + std::to_string(k) + ".bin"));
  }
  RunConfig cfg = tiny_run("files_run");
  cfg.data_source = DataSource::kFiles;
  cfg.data_glob = (std::filesystem::path(gen.out_dir) / "*.bin").string();
  cfg.steps = 2;
  const auto loaded = load_training_clouds(cfg);
  ASSERT_EQ(loaded.size(), clouds.size());
  const PretrainResult res = pretrain(cfg);
  EXPECT_EQ(res.metrics.size(), 2u);
  cfg.data_glob = (std::filesystem::path(gen.out_dir) / "*.none").string();
  EXPECT_THROW(pretrain(cfg), std::runtime_error);
}

TEST(Sweep, OneRowPerRatio) {
  RunConfig cfg = tiny_run("sweep");
  cfg.steps = 2;
  const auto one = sweep_mask_ratio(cfg, {0.7});
  ASSERT_EQ(one.size(), 1u);
  EXPECT_DOUBLE_EQ(one[0].ratio, 0.7);
  const auto rows = sweep_mask_ratio(cfg, {0.5, 0.6});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(cfg.out_dir) / "ratio_0.50" / "checkpoint.bvma"));
  EXPECT_EQ(lines_of(std::filesystem::path(cfg.out_dir) / "sweep.csv").size(), 3u);
  const std::string table = format_sweep_table(rows);
  EXPECT_NE(table.find("| 0.50 |"), std::string::npos);
  EXPECT_NE(table.find("| 0.60 |"), std::string::npos);
  EXPECT_THROW(sweep_mask_ratio(cfg, {1.2}), std::invalid_argument);
  // Same seed, same numbers.
  const auto again = sweep_mask_ratio(cfg, {0.5, 0.6});
  EXPECT_EQ(again[1].final_total, rows[1].final_total);
}

}  // namespace
}  // namespace bevmae
