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

// Subcommands of the finepillar tool. Each validates its configuration
// before creating or writing any output and throws InputError or
// DefectError on failure.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "finepillar/pipeline.hpp"

namespace finepillar::cli {

namespace fs = std::filesystem;

/// Default configuration when `path` is empty.
PipelineConfig load_config(const std::optional<fs::path>& path);

struct SynthOptions {
  std::optional<fs::path> config;
  int count = 1;
  fs::path out_dir;
  std::string format = "bin";  // bin or csv
};
/// Writes scene_NNNN.{bin,csv} and scene_NNNN.json.
void cmd_synth(const SynthOptions& opt, std::ostream& log);

struct HeightStatsOptions {
  std::vector<fs::path> inputs;
  fs::path out;
  double bin_width = 0.1;
  double z_lo = -2.0;
  double z_hi = 4.0;
};
/// CSV: scene,z_center,count
void cmd_stats_height(const HeightStatsOptions& opt);

struct SparsityStatsOptions {
  std::optional<fs::path> config;
  std::vector<fs::path> inputs;
  fs::path out;
  std::vector<int> n_sub{1, 2, 4, 6, 8};
  std::vector<double> grid_sizes{0.32, 0.16};
};
/// CSV: scene,grid_size,n_sub,total_cells,occupied_cells,occupancy_ratio
void cmd_stats_sparsity(const SparsityStatsOptions& opt);

struct InitWeightsOptions {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  fs::path out;
};
void cmd_init_weights(const InitWeightsOptions& opt, std::ostream& log);

struct InferOptions {
  std::optional<fs::path> config;
  std::optional<fs::path> weights;
  std::vector<fs::path> scenes;
  fs::path out_dir;
  int threads = 1;
};
/// One <stem>.json detection file per scene; per-stage timings go to `log`.
void cmd_infer(const InferOptions& opt, std::ostream& log);

struct EvalOptions {
  std::optional<fs::path> config;
  fs::path detections_dir;
  fs::path labels_dir;
  fs::path out;
};
/// Pairs every <stem>.json in the labels directory with the detection file
/// of the same name. Writes the CSV and prints a summary to `log`.
void cmd_eval(const EvalOptions& opt, std::ostream& log);

struct BenchOptions {
  std::optional<fs::path> config;
  std::optional<fs::path> weights;
  fs::path scene;
  int repetitions = 5;
  std::optional<fs::path> out;
};
/// CSV: stage,min_ms,median_ms,p95_ms (to `out`, or to `log` when unset).
void cmd_bench(const BenchOptions& opt, std::ostream& log);

}  // namespace finepillar::cli
