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

// Detection metrics: greedy matching, interpolated AP over fixed recall
// positions, and heading-weighted APH per class and difficulty level.

#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "finepillar/geom.hpp"
#include "finepillar/scene.hpp"

namespace finepillar {

enum class IouKind { kBev, k3d };

struct EvalConfig {
  std::array<double, kNumClasses> iou_thresholds{0.7, 0.5, 0.5};
  IouKind iou_kind = IouKind::k3d;
  int recall_positions = 40;
  /// Level 1 needs at least this many points; level 2 needs at least one.
  int level1_min_points = 6;

  void validate() const;
};

inline constexpr int kNumLevels = 2;

/// Highest level a label belongs to: 1, 2, or 0 (no points, in neither).
/// Throws InputError when a label has no point count.
std::vector<int> assign_difficulty(std::span<const LabeledBox> labels,
                                   const EvalConfig& cfg);

struct MatchResult {
  bool is_tp = false;
  bool ignored = false;  // matched a ground truth outside the scored set
  int matched_gt = -1;
  double heading_weight = 0;
};

/// Greedy matching of single-class detections, in descending score order,
/// to the unmatched ground truth of highest IoU at or above the threshold
/// (ties: lower index). With `scored`, unflagged ground truths are only
/// tried when no flagged one qualifies, and such matches mark the detection
/// as ignored. Results are in input order.
std::vector<MatchResult> match_detections(std::span<const Detection> dets,
                                          std::span<const Box7d> gts,
                                          double iou_threshold, IouKind kind,
                                          const std::vector<bool>& scored = {});

/// Mean over r = 1/R .. R/R of the best precision at recall >= r. `tp` is in
/// descending score order. With weights, weight sums stand in for true
/// positive counts. Empty ground truth gives no value.
std::optional<double> average_precision(const std::vector<bool>& tp, Index num_gt,
                                        int recall_positions = 40,
                                        std::span<const double> weights = {});

struct EvalScene {
  std::vector<Detection> detections;
  std::vector<LabeledBox> labels;
};

struct EvalCell {
  int class_id = 0;
  int level = 1;
  Index num_gt = 0;
  Index num_det = 0;
  std::optional<double> ap;
  std::optional<double> aph;
};

struct EvalResult {
  std::vector<EvalCell> cells;  // class-major, level 1 then level 2
  std::array<std::optional<double>, kNumLevels> mean_ap;
  std::array<std::optional<double>, kNumLevels> mean_aph;

  const EvalCell& cell(int class_id, int level) const;
};

/// Pools detections and ground truth across scenes per (class, level);
/// level 2 includes level 1 boxes.
EvalResult evaluate(std::span<const EvalScene> scenes, const EvalConfig& cfg);

/// Header `class,level,AP,APH`; absent values are empty fields; mean rows
/// use class `mean`.
std::string eval_to_csv(const EvalResult& result);
std::string eval_summary(const EvalResult& result);

}  // namespace finepillar
