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

#include "bevmae/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "bevmae/io.hpp"
#include "bevmae/random.hpp"
#include "bevmae/synthetic.hpp"

namespace bevmae {
namespace {

constexpr std::uint64_t kSceneStream = 0x5ce9e5;
constexpr std::uint64_t kMaskStream = 0x3a5c;
constexpr std::uint64_t kInitStream = 0x1417;

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string run_meta_json(const RunConfig& cfg) {
  nlohmann::ordered_json meta;
  meta["format"] = "bevmae-run";
  meta["config"] = cfg.to_text();
  meta["schedule"] = {{"kind", "one-cycle-cosine"},
                      {"max_lr", cfg.schedule.max_lr},
                      {"pct_start", cfg.schedule.pct_start},
                      {"div_factor", cfg.schedule.div_factor},
                      {"final_div_factor", cfg.schedule.final_div_factor},
                      {"total_steps", cfg.steps}};
  meta["adam"] = {{"beta1", cfg.adam.beta1}, {"beta2", cfg.adam.beta2}, {"eps", cfg.adam.eps}};
  meta["precision"] = "f64";
  return meta.dump(2) + "\n";
}

template <typename Get>
double window_mean(const std::vector<MetricsRecord>& metrics, std::int64_t first, std::int64_t last, Get get) {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& m : metrics) {
    if (m.step >= first && m.step <= last) {
      acc += get(m);
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("no metrics records in the requested step window");
  return acc / static_cast<double>(n);
}

}  // namespace

std::string to_json_line(const MetricsRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["loss_total"] = r.loss_total;
  j["loss_chamfer"] = r.loss_chamfer;
  j["loss_density"] = r.loss_density;
  j["lr"] = r.lr;
  return j.dump();
}

MetricsRecord parse_metrics_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  return {j.at("step").get<std::int64_t>(), j.at("loss_total").get<double>(), j.at("loss_chamfer").get<double>(),
          j.at("loss_density").get<double>(), j.at("lr").get<double>()};
}

std::vector<PointCloud> load_training_clouds(const RunConfig& cfg) {
  std::vector<PointCloud> clouds;
  if (cfg.data_source == DataSource::kSynthetic) {
    clouds.reserve(cfg.num_scenes);
    for (std::size_t k = 0; k < cfg.num_scenes; ++k) clouds.push_back(generate_scene(cfg.scene_config(k)));
    return clouds;
  }
  for (const auto& path : glob_paths(cfg.data_glob)) {
    BinCloud loaded = load_bin_cloud(path);
    if (loaded.rejected > 0) {
      std::fprintf(stderr, "warning: %s: rejected %zu non-finite records\n", path.string().c_str(), loaded.rejected);
    }
    clouds.push_back(std::move(loaded.cloud));
  }
  if (clouds.empty()) throw std::runtime_error("no point-cloud files match '" + cfg.data_glob + "'");
  return clouds;
}

PretrainResult pretrain(const RunConfig& cfg, const PretrainOptions& options) {
  cfg.validate();
  const ModelConfig& model = cfg.model;

  std::vector<SceneData> scenes;
  for (PointCloud& cloud : load_training_clouds(cfg)) {
    SceneData scene = prepare_scene(std::move(cloud), model);
    if (!scene.occupancy.grids.empty()) scenes.push_back(std::move(scene));
  }
  if (scenes.empty()) throw std::runtime_error("pretrain: every scene is empty inside the grid range");

  PretrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  ckpt.model = model;
  ckpt.params = init_model_params(model, derive_seed(cfg.seed, kInitStream));
  ckpt.optim = OptimState::zeros_like(ckpt.params);
  ckpt.step = 0;

  const std::filesystem::path out_dir(cfg.out_dir);
  const std::filesystem::path ckpt_path = out_dir / "checkpoint.bvma";
  std::ofstream metrics_file;
  if (options.write_files) {
    std::filesystem::create_directories(out_dir);
    write_text(out_dir / "run_config.txt", cfg.to_text());
    write_text(out_dir / "run_meta.json", run_meta_json(cfg));
    metrics_file.open(out_dir / "metrics.jsonl", std::ios::trunc);
    if (!metrics_file) throw std::runtime_error("cannot write metrics to " + out_dir.string());
    save_checkpoint(ckpt, ckpt_path);
  }

  for (std::int64_t step = 1; step <= cfg.steps; ++step) {
    const double lr = one_cycle_lr(step - 1, cfg.steps, cfg.schedule);
    ParameterSet grads = ckpt.params.zeros_like();
    LossValues loss;
    SplitMix64 pick(derive_seed(cfg.seed, kSceneStream, static_cast<std::uint64_t>(step)));
    for (int b = 0; b < cfg.batch_size; ++b) {
      const SceneData& scene = scenes[static_cast<std::size_t>(pick.below(scenes.size()))];
      const std::uint64_t mask_seed =
          derive_seed(cfg.seed ^ kMaskStream, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(b));
      const MaskedView view = mask_scene(scene, model, cfg.mask_ratio, mask_seed);
      const LossAndGrad lg = loss_and_gradients(ckpt.params, model, scene, view);
      loss.total += lg.loss.total;
      loss.chamfer += lg.loss.chamfer;
      loss.density += lg.loss.density;
      for (std::size_t k = 0; k < grads.size(); ++k) grads.entries()[k].value += lg.grads.entries()[k].value;
      if (options.keep_mask_plans) result.mask_plans.push_back(view.plan);
    }
    const double inv = 1.0 / cfg.batch_size;
    loss.total *= inv;
    loss.chamfer *= inv;
    loss.density *= inv;
    if (!std::isfinite(loss.total)) {
      throw std::runtime_error("pretrain: non-finite loss at step " + std::to_string(step) +
                               "; last good checkpoint is at step " + std::to_string(ckpt.step));
    }
    for (auto& g : grads.entries()) g.value *= inv;
    adam_step(*ckpt.optim, ckpt.params, grads, lr, cfg.adam);
    ckpt.step = step;

    MetricsRecord record{step, loss.total, loss.chamfer, loss.density, lr};
    result.metrics.push_back(record);
    const std::string line = to_json_line(record);
    if (options.write_files) metrics_file << line << '\n' << std::flush;
    if (options.metrics_stream) *options.metrics_stream << line << '\n' << std::flush;

    if (options.write_files && cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) {
      save_checkpoint(ckpt, ckpt_path);
    }
  }
  if (options.write_files) save_checkpoint(ckpt, ckpt_path);
  return result;
}

double mean_total_loss(const std::vector<MetricsRecord>& metrics, std::int64_t first, std::int64_t last) {
  return window_mean(metrics, first, last, [](const MetricsRecord& m) { return m.loss_total; });
}

double mean_density_loss(const std::vector<MetricsRecord>& metrics, std::int64_t first, std::int64_t last) {
  return window_mean(metrics, first, last, [](const MetricsRecord& m) { return m.loss_density; });
}

std::vector<SweepRow> sweep_mask_ratio(const RunConfig& cfg, const std::vector<double>& ratios,
                                       const PretrainOptions& options) {
  if (ratios.empty()) throw std::invalid_argument("sweep: no ratios given");
  for (double r : ratios) {
    if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("sweep: ratios must lie in (0, 1)");
  }
  std::vector<SweepRow> rows;
  for (double r : ratios) {
    RunConfig run = cfg;
    run.mask_ratio = r;
    std::ostringstream dir;
    dir << "ratio_" << std::fixed << std::setprecision(2) << r;
    run.out_dir = (std::filesystem::path(cfg.out_dir) / dir.str()).string();
    const PretrainResult res = pretrain(run, options);

    SweepRow row;
    row.ratio = r;
    row.steps = run.steps;
    if (!res.metrics.empty()) {
      const std::int64_t first = std::max<std::int64_t>(1, run.steps - 9);
      row.final_total = mean_total_loss(res.metrics, first, run.steps);
      row.final_density = mean_density_loss(res.metrics, first, run.steps);
      row.final_chamfer = window_mean(res.metrics, first, run.steps,
                                      [](const MetricsRecord& m) { return m.loss_chamfer; });
    }
    rows.push_back(row);
  }
  if (options.write_files) {
    std::ostringstream csv;
    csv << "ratio,steps,final_total,final_chamfer,final_density\n" << std::setprecision(17);
    for (const auto& row : rows) {
      csv << row.ratio << ',' << row.steps << ',' << row.final_total << ',' << row.final_chamfer << ','
          << row.final_density << '\n';
    }
    std::filesystem::create_directories(cfg.out_dir);
    write_text(std::filesystem::path(cfg.out_dir) / "sweep.csv", csv.str());
  }
  return rows;
}

std::string format_sweep_table(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "| ratio | steps | final total | final chamfer | final density |\n"
      << "|------:|------:|------------:|--------------:|--------------:|\n";
  for (const auto& r : rows) {
    out << "| " << std::fixed << std::setprecision(2) << r.ratio << " | " << r.steps << " | " << std::setprecision(6)
        << r.final_total << " | " << r.final_chamfer << " | " << r.final_density << " |\n";
  }
  return out.str();
}

ModelConfig gradcheck_model_config() {
  ModelConfig cfg;
  cfg.grid.x_min = -3.2;
  cfg.grid.x_max = 3.2;
  cfg.grid.y_min = -3.2;
  cfg.grid.y_max = 3.2;
  return cfg;
}

GradCheckReport run_model_gradcheck(const GradCheckSetup& setup) {
  const ModelConfig model = gradcheck_model_config();
  SceneConfig scene_cfg = SceneConfig::matching(model.grid);
  scene_cfg.n_objects = 2;
  scene_cfg.object_length = {1.0, 2.0};
  scene_cfg.object_width = {0.8, 1.2};
  scene_cfg.min_object_range = 1.0;
  scene_cfg.points_budget = setup.num_points * 2;
  scene_cfg.seed = setup.seed;
  PointCloud cloud = generate_scene(scene_cfg);
  if (cloud.points.size() < setup.num_points) throw std::runtime_error("gradcheck: scene has too few points");
  cloud.points.resize(setup.num_points);

  const SceneData scene = prepare_scene(std::move(cloud), model);
  const MaskedView view = mask_scene(scene, model, setup.mask_ratio, derive_seed(setup.seed, kMaskStream));
  ParameterSet params = init_model_params(model, derive_seed(setup.seed, kInitStream));
  const LossAndGrad analytic = loss_and_gradients(params, model, scene, view);
  BranchLog base;
  evaluate_loss(params, model, scene, view, &base);
  const ObjectiveFn f = [&](const ParameterSet& p) { return evaluate_loss(p, model, scene, view); };
  const FrozenObjectiveFn frozen = [&](const ParameterSet& p) {
    return evaluate_loss_frozen(p, model, scene, view, base);
  };
  return grad_check(f, params, analytic.grads, setup.options, frozen);
}

}  // namespace bevmae
