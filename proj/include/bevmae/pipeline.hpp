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
#include <iosfwd>
#include <string>
#include <vector>

#include "bevmae/checkpoint.hpp"
#include "bevmae/config.hpp"
#include "bevmae/gradcheck.hpp"
#include "bevmae/masking.hpp"
#include "bevmae/model.hpp"

namespace bevmae {

struct MetricsRecord {
  std::int64_t step = 0;
  double loss_total = 0.0;
  double loss_chamfer = 0.0;
  double loss_density = 0.0;
  double lr = 0.0;
};

std::string to_json_line(const MetricsRecord& record);
MetricsRecord parse_metrics_line(const std::string& line);

struct PretrainOptions {
  // Writes metrics.jsonl, run_meta.json and checkpoint.bvma under cfg.out_dir.
  bool write_files = true;
  // Additional sink for the JSON-lines metrics stream.
  std::ostream* metrics_stream = nullptr;
  bool keep_mask_plans = false;
};

struct PretrainResult {
  Checkpoint checkpoint;
  std::vector<MetricsRecord> metrics;
  std::vector<MaskPlan> mask_plans;  // step-major, only with keep_mask_plans
};

// Scenes a run trains on: synthetic ones generated from the run seed or the
// files matched by data.glob.
std::vector<PointCloud> load_training_clouds(const RunConfig& cfg);

// Throws std::runtime_error on a non-finite loss or gradient; the checkpoint
// on disk is then the last one written before the failure.
PretrainResult pretrain(const RunConfig& cfg, const PretrainOptions& options = {});

// Mean of loss_total over records whose step lies in [first, last].
double mean_total_loss(const std::vector<MetricsRecord>& metrics, std::int64_t first, std::int64_t last);
double mean_density_loss(const std::vector<MetricsRecord>& metrics, std::int64_t first, std::int64_t last);

struct SweepRow {
  double ratio = 0.0;
  std::int64_t steps = 0;
  double final_total = 0.0;  // mean over the last min(10, steps) records
  double final_chamfer = 0.0;
  double final_density = 0.0;
};

// One full pretraining run per ratio, all sharing cfg.seed. Run outputs go to
// <out_dir>/ratio_<r>; the table is written to <out_dir>/sweep.csv.
std::vector<SweepRow> sweep_mask_ratio(const RunConfig& cfg, const std::vector<double>& ratios,
                                       const PretrainOptions& options = {});
std::string format_sweep_table(const std::vector<SweepRow>& rows);

struct GradCheckSetup {
  std::size_t num_points = 200;
  std::uint64_t seed = 7;
  double mask_ratio = 0.7;
  GradCheckOptions options{1e-4, 1e-6, 48, 11};
};

// Small-extent grid (8 x 8 BEV cells) that the default encoder stack tiles.
ModelConfig gradcheck_model_config();

// Full-pipeline gradient check on a synthetic scene of setup.num_points points.
GradCheckReport run_model_gradcheck(const GradCheckSetup& setup = {});

}  // namespace bevmae
