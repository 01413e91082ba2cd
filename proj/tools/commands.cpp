// Copyright 2026 The FinePillar Authors. All Rights Reserved.
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

#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <ostream>
#include <thread>

namespace finepillar::cli {
namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw InputError("cannot create directory '" + dir.string() + "'");
  }
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) ensure_dir(file.parent_path());
}

std::string number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string milliseconds(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string scene_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%04d", i);
  return buf;
}

PointCloud read_scene_points(const fs::path& path) {
  return read_point_cloud(path, point_format_for(path));
}

}  // namespace

PipelineConfig load_config(const std::optional<fs::path>& path) {
  if (!path) {
    PipelineConfig cfg;
    cfg.validate();
    return cfg;
  }
  return load_pipeline_config(*path);
}

void cmd_synth(const SynthOptions& opt, std::ostream& log) {
  const PipelineConfig cfg = load_config(opt.config);
  if (opt.count < 0) throw InputError("synth: --count must be >= 0");
  if (opt.format != "bin" && opt.format != "csv") {
    throw InputError("synth: --format must be bin or csv");
  }
  const PointFormat format = opt.format == "csv" ? PointFormat::kCsv : PointFormat::kBinaryF32;
  ensure_dir(opt.out_dir);
  for (int i = 0; i < opt.count; ++i) {
    const Scene scene = synth_scene(synth_config_for(cfg, static_cast<std::uint64_t>(i)));
    const std::string name = scene_name(i);
    write_point_cloud(opt.out_dir / (name + "." + opt.format), scene.cloud, format);
    write_labels(opt.out_dir / (name + ".json"), scene.labels);
    log << name << ": " << scene.cloud.count() << " points, " << scene.labels.size()
        << " boxes\n";
  }
}

void cmd_stats_height(const HeightStatsOptions& opt) {
  if (opt.inputs.empty()) throw InputError("stats height: no input scenes");
  if (!(opt.bin_width > 0) || !(opt.z_lo < opt.z_hi)) {
    throw InputError("stats height: need --bin-width > 0 and --z-lo < --z-hi");
  }
  std::string csv = "scene,z_center,count\n";
  for (const fs::path& in : opt.inputs) {
    const PointCloud cloud = read_scene_points(in);
    for (const HistogramBin& b : height_histogram(cloud, opt.bin_width, opt.z_lo, opt.z_hi)) {
      csv += in.stem().string() + "," + number(b.center) + "," + std::to_string(b.count) + "\n";
    }
  }
  ensure_parent(opt.out);
  write_text(opt.out, csv);
}

void cmd_stats_sparsity(const SparsityStatsOptions& opt) {
  const PipelineConfig cfg = load_config(opt.config);
  if (opt.inputs.empty()) throw InputError("stats sparsity: no input scenes");
  for (double s : opt.grid_sizes) {
    for (int n : opt.n_sub) {
      GridConfig g = cfg.grid;
      g.grid_size = s;
      g.n_sub = n;
      g.validate();
    }
  }
  std::string csv = "scene,grid_size,n_sub,total_cells,occupied_cells,occupancy_ratio\n";
  for (const fs::path& in : opt.inputs) {
    const PointCloud cloud = read_scene_points(in);
    for (const SparsityRow& r : sparsity_stats(cloud, cfg.grid, opt.n_sub, opt.grid_sizes)) {
      csv += in.stem().string() + "," + number(r.grid_size) + "," + std::to_string(r.n_sub) +
             "," + std::to_string(r.total_cells) + "," + std::to_string(r.occupied_cells) +
             "," + number(r.occupancy_ratio) + "\n";
    }
  }
  ensure_parent(opt.out);
  write_text(opt.out, csv);
}

void cmd_init_weights(const InitWeightsOptions& opt, std::ostream& log) {
  PipelineConfig cfg = load_config(opt.config);
  if (opt.seed) cfg.seed = *opt.seed;
  cfg.weights.reset();
  const WeightStore store = pipeline_weights(cfg);
  ensure_parent(opt.out);
  save_weights(store, opt.out);
  Index total = 0;
  for (const auto& [name, t] : store.tensors()) total += t.values.size();
  log << "wrote " << store.size() << " tensors (" << total << " values) to " << opt.out.string()
      << "\n";
}

void cmd_infer(const InferOptions& opt, std::ostream& log) {
  PipelineConfig cfg = load_config(opt.config);
  if (opt.weights) cfg.weights = *opt.weights;
  if (opt.threads < 1) throw InputError("infer: --threads must be >= 1");
  if (opt.scenes.empty()) throw InputError("infer: no input scenes");
  const WeightStore weights = pipeline_weights(cfg);
  ensure_dir(opt.out_dir);

  const std::size_t n = opt.scenes.size();
  std::vector<InferenceResult> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        const PointCloud cloud = read_scene_points(opt.scenes[i]);
        results[i] = run_inference(cloud, cfg, weights);
        write_detections(opt.out_dir / (opt.scenes[i].stem().string() + ".json"),
                         results[i].detections);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto workers = static_cast<std::size_t>(std::min<std::size_t>(
      static_cast<std::size_t>(opt.threads), n));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    const std::string stem = opt.scenes[i].stem().string();
    double total = 0;
    for (const StageTiming& t : results[i].timings) {
      log << "timing " << stem << " " << t.stage << " " << milliseconds(t.milliseconds)
          << " ms\n";
      total += t.milliseconds;
    }
    log << "timing " << stem << " total " << milliseconds(total) << " ms\n";
    log << stem << ": " << results[i].detections.size() << " detections from "
        << results[i].occupied_subpillars << " occupied sub-pillars\n";
  }
}

void cmd_eval(const EvalOptions& opt, std::ostream& log) {
  const PipelineConfig cfg = load_config(opt.config);
  if (!fs::is_directory(opt.labels_dir)) {
    throw InputError("eval: labels directory '" + opt.labels_dir.string() + "' not found");
  }
  if (!fs::is_directory(opt.detections_dir)) {
    throw InputError("eval: detections directory '" + opt.detections_dir.string() +
                     "' not found");
  }
  std::vector<fs::path> label_files;
  for (const auto& entry : fs::directory_iterator(opt.labels_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      label_files.push_back(entry.path());
    }
  }
  std::sort(label_files.begin(), label_files.end());
  std::vector<EvalScene> scenes;
  for (const fs::path& lf : label_files) {
    const fs::path df = opt.detections_dir / lf.filename();
    if (!fs::exists(df)) {
      throw InputError("eval: no detections for '" + lf.filename().string() + "' in '" +
                       opt.detections_dir.string() + "'");
    }
    scenes.push_back({read_detections(df), read_labels(lf)});
  }
  const EvalResult result = evaluate(scenes, cfg.eval);
  ensure_parent(opt.out);
  write_text(opt.out, eval_to_csv(result));
  log << "evaluated " << scenes.size() << " scenes\n" << eval_summary(result);
}

void cmd_bench(const BenchOptions& opt, std::ostream& log) {
  PipelineConfig cfg = load_config(opt.config);
  if (opt.weights) cfg.weights = *opt.weights;
  if (opt.repetitions < 1) throw InputError("bench: --repetitions must be >= 1");
  const WeightStore weights = pipeline_weights(cfg);
  const PointCloud cloud = read_scene_points(opt.scene);

  std::vector<std::string> stages;
  std::map<std::string, std::vector<double>> samples;
  for (int r = 0; r < opt.repetitions; ++r) {
    const InferenceResult res = run_inference(cloud, cfg, weights);
    double total = 0;
    for (const StageTiming& t : res.timings) {
      if (r == 0) stages.push_back(t.stage);
      samples[t.stage].push_back(t.milliseconds);
      total += t.milliseconds;
    }
    if (r == 0) stages.push_back("total");
    samples["total"].push_back(total);
  }
  std::string csv = "stage,min_ms,median_ms,p95_ms\n";
  for (const std::string& stage : stages) {
    std::vector<double> v = samples[stage];
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size();
    const double median = m % 2 ? v[m / 2] : (v[m / 2 - 1] + v[m / 2]) / 2;
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(m)));
    csv += stage + "," + milliseconds(v.front()) + "," + milliseconds(median) + "," +
           milliseconds(v[std::max<std::size_t>(rank, 1) - 1]) + "\n";
  }
  if (opt.out) {
    ensure_parent(*opt.out);
    write_text(*opt.out, csv);
  } else {
    log << csv;
  }
}

}  // namespace finepillar::cli
