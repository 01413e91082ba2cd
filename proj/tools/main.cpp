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

// finepillar: synthesis, statistics, inference, evaluation and benchmarks.
// Exit status: 0 success, 1 input error, 2 internal defect.

#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"

namespace {

namespace cli = finepillar::cli;

constexpr int kExitInput = 1;
constexpr int kExitDefect = 2;

int run(int argc, char** argv) {
  CLI::App app{"Sub-pillar LiDAR 3D detection toolkit"};
  app.require_subcommand(1);
  std::string stage;

  std::optional<std::filesystem::path> config;
  auto add_config = [&config](CLI::App* sub) {
    sub->add_option("-c,--config", config, "Pipeline configuration (JSON)");
  };

  cli::SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write synthetic scenes and labels");
  add_config(synth_cmd);
  synth_cmd->add_option("-n,--count", synth.count, "Number of scenes")->capture_default_str();
  synth_cmd->add_option("-o,--out", synth.out_dir, "Output directory")->required();
  synth_cmd->add_option("--format", synth.format, "Point format: bin or csv")
      ->capture_default_str();

  auto* stats_cmd = app.add_subcommand("stats", "Dataset statistics");
  stats_cmd->require_subcommand(1);
  cli::HeightStatsOptions height;
  auto* height_cmd = stats_cmd->add_subcommand("height", "Point height histograms");
  height_cmd->add_option("inputs", height.inputs, "Point files")->required();
  height_cmd->add_option("-o,--out", height.out, "Output CSV")->required();
  height_cmd->add_option("--bin-width", height.bin_width)->capture_default_str();
  height_cmd->add_option("--z-lo", height.z_lo)->capture_default_str();
  height_cmd->add_option("--z-hi", height.z_hi)->capture_default_str();
  cli::SparsityStatsOptions sparsity;
  auto* sparsity_cmd = stats_cmd->add_subcommand("sparsity", "Sub-pillar occupancy tables");
  add_config(sparsity_cmd);
  sparsity_cmd->add_option("inputs", sparsity.inputs, "Point files")->required();
  sparsity_cmd->add_option("-o,--out", sparsity.out, "Output CSV")->required();
  sparsity_cmd->add_option("--n-sub", sparsity.n_sub, "Sub-pillar counts")
      ->delimiter(',')
      ->capture_default_str();
  sparsity_cmd->add_option("--grid-sizes", sparsity.grid_sizes, "Grid sizes in meters")
      ->delimiter(',')
      ->capture_default_str();

  cli::InitWeightsOptions init;
  auto* init_cmd = app.add_subcommand("init-weights", "Write seeded random weights (PKW1)");
  add_config(init_cmd);
  init_cmd->add_option("--seed", init.seed, "Overrides the config seed");
  init_cmd->add_option("-o,--out", init.out, "Output weight file")->required();

  cli::InferOptions infer;
  auto* infer_cmd = app.add_subcommand("infer", "Detect objects in point files");
  add_config(infer_cmd);
  infer_cmd->add_option("-w,--weights", infer.weights, "PKW1 weights; default: seeded random");
  infer_cmd->add_option("scenes", infer.scenes, "Point files")->required();
  infer_cmd->add_option("-o,--out", infer.out_dir, "Output directory")->required();
  infer_cmd->add_option("--threads", infer.threads, "Scenes processed in parallel")
      ->capture_default_str();

  cli::EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "AP / APH per class and difficulty");
  add_config(eval_cmd);
  eval_cmd->add_option("-d,--detections", eval.detections_dir, "Detection directory")
      ->required();
  eval_cmd->add_option("-l,--labels", eval.labels_dir, "Label directory")->required();
  eval_cmd->add_option("-o,--out", eval.out, "Output CSV")->required();

  cli::BenchOptions bench;
  auto* bench_cmd = app.add_subcommand("bench", "Per-stage latency statistics");
  add_config(bench_cmd);
  bench_cmd->add_option("-w,--weights", bench.weights, "PKW1 weights; default: seeded random");
  bench_cmd->add_option("scene", bench.scene, "Point file")->required();
  bench_cmd->add_option("-r,--repetitions", bench.repetitions)->capture_default_str();
  bench_cmd->add_option("-o,--out", bench.out, "Output CSV; default: stdout");

  auto* config_cmd = app.add_subcommand("config", "Print the fully expanded configuration");
  add_config(config_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*synth_cmd) {
      stage = "synth";
      synth.config = config;
      cli::cmd_synth(synth, std::cerr);
    } else if (*height_cmd) {
      stage = "stats height";
      cli::cmd_stats_height(height);
    } else if (*sparsity_cmd) {
      stage = "stats sparsity";
      sparsity.config = config;
      cli::cmd_stats_sparsity(sparsity);
    } else if (*init_cmd) {
      stage = "init-weights";
      init.config = config;
      cli::cmd_init_weights(init, std::cerr);
    } else if (*infer_cmd) {
      stage = "infer";
      infer.config = config;
      cli::cmd_infer(infer, std::cerr);
    } else if (*eval_cmd) {
      stage = "eval";
      eval.config = config;
      cli::cmd_eval(eval, std::cout);
    } else if (*bench_cmd) {
      stage = "bench";
      bench.config = config;
      cli::cmd_bench(bench, std::cout);
    } else if (*config_cmd) {
      stage = "config";
      std::cout << finepillar::pipeline_config_to_json(cli::load_config(config));
    }
  } catch (const finepillar::InputError& e) {
    std::cerr << "error [" << stage << "]: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error [" << stage << "]: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error [" << stage << "]: " << e.what() << "\n";
    return kExitDefect;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
