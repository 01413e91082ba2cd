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

// Center-heatmap detection head: dense maps, training targets and losses,
// and decoding into rotated boxes.

#pragma once

#include <array>
#include <vector>

#include "finepillar/geom.hpp"
#include "finepillar/pillarize.hpp"
#include "finepillar/scene.hpp"
#include "finepillar/tensor.hpp"
#include "finepillar/weights.hpp"

namespace finepillar {

struct HeadConfig {
  Index num_classes = kNumClasses;
  Index hidden_channels = 64;

  void validate() const;
};

/// All maps share the spatial size of the head input.
struct HeadOutputs {
  Tensor4f heatmap;  // (1, num_classes, h, w) logits
  Tensor4f offset;   // (1, 2, h, w) sub-cell center offset, cells
  Tensor4f height;   // (1, 1, h, w) center height, meters
  Tensor4f size;     // (1, 3, h, w) log(length, width, height)
  Tensor4f yaw;      // (1, 2, h, w) (sin, cos)
  Tensor4f iou;      // (1, 1, h, w) raw box-quality estimate
};

/// head.<name>.block (3x3 conv block) and head.<name>.out (1x1 conv) for
/// each of hm, offset, height, size, yaw, iou.
std::vector<ParamSpec> head_params(const HeadConfig& cfg, Index in_channels);

HeadOutputs head_forward(const Tensor4f& features, const WeightStore& weights,
                         const HeadConfig& cfg);

/// Regression channel order in HeadTargets::regression.
inline constexpr Index kRegressionChannels = 8;  // dx, dy, z, log l, log w, log h, sin, cos

struct TargetCell {
  Index ix = 0;
  Index iy = 0;
  int class_id = 0;
  std::size_t label = 0;
};

struct HeadTargets {
  Tensor4f heatmap;     // (1, num_classes, h, w)
  Tensor4f regression;  // (1, 8, h, w), written only at center cells
  std::vector<TargetCell> centers;
  Index skipped = 0;    // labels whose center falls outside the map
};

/// CenterNet radius (cells) for a box footprint of `length_cells` x
/// `width_cells` so that corner-shifted boxes keep IoU >= min_overlap.
double gaussian_radius(double length_cells, double width_cells,
                       double min_overlap = 0.7);

/// Gaussian splats (elementwise max across labels of a class) with peak 1 at
/// each label's center cell. Later labels overwrite regression targets of a
/// shared center cell.
HeadTargets render_targets(std::span<const LabeledBox> labels,
                           const GridConfig& grid, Index output_stride,
                           Index num_classes = kNumClasses);

/// Penalty-reduced focal loss over sigmoid(pred), normalized by the number
/// of cells whose target equals 1 (at least one).
double focal_loss(const Tensor4f& pred_logits, const Tensor4f& target);

/// Mean absolute error over center cells and the 8 regression channels; 0
/// without centers.
double l1_reg_loss(const HeadOutputs& pred, const HeadTargets& targets);

struct DecodeConfig {
  Index top_k = 100;
  double score_threshold = 0.1;
  double nms_threshold = 0.2;
  std::array<double, kNumClasses> beta{0.5, 0.5, 0.5};
  Index output_stride = 2;

  void validate() const;
};

/// p^(1 - beta) * u^beta with u = clamp((iou_raw + 1) / 2, 0, 1).
double rectified_score(double p, double iou_raw, double beta);

/// Peaks are cells whose probability is >= every 3x3 neighbor of the same
/// class; the top_k peaks over all classes are decoded, thresholded on the
/// rectified score and suppressed per class.
std::vector<Detection> decode(const HeadOutputs& outputs, const GridConfig& grid,
                              const DecodeConfig& cfg);

}  // namespace finepillar
