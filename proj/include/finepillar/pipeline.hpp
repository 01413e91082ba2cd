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

// End-to-end configuration and single-scene inference.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "finepillar/dfsa.hpp"
#include "finepillar/eval.hpp"
#include "finepillar/head.hpp"
#include "finepillar/pfe.hpp"
#include "finepillar/pillarize.hpp"
#include "finepillar/scene.hpp"
#include "finepillar/weights.hpp"

namespace finepillar {

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> weights;
  GridConfig grid;
  PFEConfig pfe;  // carries the height encoding settings
  SCBConfig scb = scb_preset("s24_n35");
  HeadConfig head;
  DecodeConfig decode;
  EvalConfig eval;
  SynthConfig synth;

  /// Member invariants plus the cross-stage shape contract: the grid must
  /// divide through every module's scales and the decode stride must equal
  /// the backbone's output stride.
  void validate() const;
  Index pseudo_image_channels() const;
};

/// JSON object; every section and key is optional and unknown keys are
/// rejected. `source` prefixes error messages.
PipelineConfig parse_pipeline_config(const std::string& text, const std::string& source);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
/// Fully expanded form that parses back to the same configuration.
std::string pipeline_config_to_json(const PipelineConfig& cfg);

/// Every parameter of the network, sorted by name.
std::vector<ParamSpec> all_param_specs(const PipelineConfig& cfg);

/// Weights from `cfg.weights` when set, else drawn from `cfg.seed`. Loaded
/// stores are checked against all_param_specs.
WeightStore pipeline_weights(const PipelineConfig& cfg);

/// Synthetic-scene settings for scene `index` of a run.
SynthConfig synth_config_for(const PipelineConfig& cfg, std::uint64_t index);

struct StageTiming {
  std::string stage;
  double milliseconds = 0;
};

struct InferenceResult {
  std::vector<Detection> detections;
  std::vector<StageTiming> timings;  // pillarize, pfe, scatter, backbone, head, decode
  Index points_assigned = 0;
  Index occupied_subpillars = 0;
};

InferenceResult run_inference(const PointCloud& cloud, const PipelineConfig& cfg,
                              const WeightStore& weights);

}  // namespace finepillar
