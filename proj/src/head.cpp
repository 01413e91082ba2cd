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

#include "finepillar/head.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "finepillar/layers.hpp"

namespace finepillar {
namespace {

struct HeadSlot {
  const char* name;
  Index channels;  // 0: num_classes
};

constexpr HeadSlot kSlots[] = {{"hm", 0},   {"offset", 2}, {"height", 1},
                               {"size", 3}, {"yaw", 2},    {"iou", 1}};

Index slot_channels(const HeadSlot& s, const HeadConfig& cfg) {
  return s.channels == 0 ? cfg.num_classes : s.channels;
}

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

struct MapGeometry {
  Index w = 0, h = 0;
  double cell = 0;
};

MapGeometry map_geometry(const GridConfig& grid, Index output_stride) {
  grid.validate();
  if (output_stride < 1) throw InputError("output_stride must be >= 1");
  const Index nx = grid.nx(), ny = grid.ny();
  if (nx % output_stride != 0 || ny % output_stride != 0) {
    throw InputError("grid of " + std::to_string(nx) + "x" + std::to_string(ny) +
                     " cells is not divisible by output_stride " +
                     std::to_string(output_stride));
  }
  return {nx / output_stride, ny / output_stride, grid.grid_size * static_cast<double>(output_stride)};
}

}  // namespace

void HeadConfig::validate() const {
  if (num_classes < 1) throw InputError("head: num_classes must be >= 1");
  if (hidden_channels < 1) throw InputError("head: hidden_channels must be >= 1");
}

std::vector<ParamSpec> head_params(const HeadConfig& cfg, Index in_channels) {
  cfg.validate();
  std::vector<ParamSpec> out;
  for (const HeadSlot& s : kSlots) {
    const std::string prefix = std::string("head.") + s.name;
    auto block = conv_block_params(prefix + ".block",
                                   {in_channels, cfg.hidden_channels, 1, 3});
    auto proj = conv_params(prefix + ".out", cfg.hidden_channels, slot_channels(s, cfg), 1);
    out.insert(out.end(), block.begin(), block.end());
    out.insert(out.end(), proj.begin(), proj.end());
  }
  return out;
}

HeadOutputs head_forward(const Tensor4f& features, const WeightStore& weights,
                         const HeadConfig& cfg) {
  cfg.validate();
  std::vector<Tensor4f> maps;
  for (const HeadSlot& s : kSlots) {
    const std::string prefix = std::string("head.") + s.name;
    const Tensor4f hidden = conv_block(features, weights, prefix + ".block",
                                       {features.c(), cfg.hidden_channels, 1, 3});
    maps.push_back(conv_layer(hidden, weights, prefix + ".out", cfg.hidden_channels,
                              slot_channels(s, cfg), 1, 1));
  }
  return {std::move(maps[0]), std::move(maps[1]), std::move(maps[2]),
          std::move(maps[3]), std::move(maps[4]), std::move(maps[5])};
}

double gaussian_radius(double length_cells, double width_cells, double min_overlap) {
  const double h = length_cells, w = width_cells, o = min_overlap;
  const double b1 = h + w;
  const double c1 = w * h * (1 - o) / (1 + o);
  const double r1 = (b1 + std::sqrt(b1 * b1 - 4 * c1)) / 2;
  const double b2 = 2 * (h + w);
  const double c2 = (1 - o) * w * h;
  const double r2 = (b2 + std::sqrt(b2 * b2 - 16 * c2)) / 2;
  const double a3 = 4 * o;
  const double b3 = -2 * o * (h + w);
  const double c3 = (o - 1) * w * h;
  const double r3 = (b3 + std::sqrt(b3 * b3 - 4 * a3 * c3)) / 2;
  return std::min({r1, r2, r3});
}

HeadTargets render_targets(std::span<const LabeledBox> labels,
                           const GridConfig& grid, Index output_stride,
                           Index num_classes) {
  const MapGeometry g = map_geometry(grid, output_stride);
  HeadTargets t;
  t.heatmap = Tensor4f(1, num_classes, g.h, g.w);
  t.regression = Tensor4f(1, kRegressionChannels, g.h, g.w);

  for (std::size_t i = 0; i < labels.size(); ++i) {
    const LabeledBox& label = labels[i];
    const Box7d& b = label.box;
    const double u = (b.cx - grid.x_range.lo) / g.cell;
    const double v = (b.cy - grid.y_range.lo) / g.cell;
    if (label.class_id < 0 || label.class_id >= num_classes || !(u >= 0) ||
        !(v >= 0) || u >= static_cast<double>(g.w) || v >= static_cast<double>(g.h)) {
      ++t.skipped;
      continue;
    }
    const auto ix = static_cast<Index>(u), iy = static_cast<Index>(v);

    const auto radius = static_cast<Index>(
        std::max(0.0, std::floor(gaussian_radius(b.length / g.cell, b.width / g.cell))));
    const double sigma = (2.0 * static_cast<double>(radius) + 1.0) / 6.0;
    auto plane = t.heatmap.channel(0, label.class_id);
    for (Index dy = -radius; dy <= radius; ++dy) {
      for (Index dx = -radius; dx <= radius; ++dx) {
        const Index y = iy + dy, x = ix + dx;
        if (y < 0 || y >= g.h || x < 0 || x >= g.w) continue;
        const double r2 = static_cast<double>(dx * dx + dy * dy);
        const auto value = static_cast<float>(std::exp(-r2 / (2 * sigma * sigma)));
        plane(y, x) = std::max(plane(y, x), value);
      }
    }

    const double reg[kRegressionChannels] = {
        u - static_cast<double>(ix) - 0.5, v - static_cast<double>(iy) - 0.5,
        b.cz, std::log(b.length), std::log(b.width), std::log(b.height),
        std::sin(b.yaw), std::cos(b.yaw)};
    for (Index c = 0; c < kRegressionChannels; ++c) {
      t.regression(0, c, iy, ix) = static_cast<float>(reg[c]);
    }
    t.centers.push_back({ix, iy, label.class_id, i});
  }
  return t;
}

double focal_loss(const Tensor4f& pred_logits, const Tensor4f& target) {
  if (!pred_logits.same_shape(target)) {
    throw ShapeError("focal_loss: prediction " + pred_logits.shape_string() +
                     " vs target " + target.shape_string());
  }
  constexpr double kEps = 1e-7;
  double total = 0;
  Index positives = 0;
  for (Index i = 0; i < target.size(); ++i) {
    const double p = std::clamp(logistic(pred_logits.data()[i]), kEps, 1 - kEps);
    const double t = target.data()[i];
    if (t == 1.0) {
      ++positives;
      total -= (1 - p) * (1 - p) * std::log(p);
    } else {
      total -= std::pow(1 - t, 4) * p * p * std::log(1 - p);
    }
  }
  return total / static_cast<double>(std::max<Index>(1, positives));
}

double l1_reg_loss(const HeadOutputs& pred, const HeadTargets& targets) {
  if (targets.centers.empty()) return 0.0;
  const Tensor4f* maps[] = {&pred.offset, &pred.height, &pred.size, &pred.yaw};
  for (const Tensor4f* m : maps) {
    if (m->h() != targets.regression.h() || m->w() != targets.regression.w()) {
      throw ShapeError("l1_reg_loss: prediction " + m->shape_string() + " vs target " +
                       targets.regression.shape_string());
    }
  }
  double total = 0;
  for (const TargetCell& cell : targets.centers) {
    Index channel = 0;
    for (const Tensor4f* m : maps) {
      for (Index c = 0; c < m->c(); ++c, ++channel) {
        total += std::abs(static_cast<double>((*m)(0, c, cell.iy, cell.ix)) -
                          targets.regression(0, channel, cell.iy, cell.ix));
      }
    }
  }
  return total / static_cast<double>(targets.centers.size() * kRegressionChannels);
}

void DecodeConfig::validate() const {
  if (top_k < 1) throw InputError("decode: top_k must be >= 1");
  if (!(score_threshold > 0 && score_threshold < 1)) {
    throw InputError("decode: score_threshold must lie in (0, 1)");
  }
  if (!(nms_threshold > 0 && nms_threshold < 1)) {
    throw InputError("decode: nms_threshold must lie in (0, 1)");
  }
  for (double b : beta) {
    if (!(b >= 0 && b <= 1)) throw InputError("decode: beta must lie in [0, 1]");
  }
  if (output_stride < 1) throw InputError("decode: output_stride must be >= 1");
}

double rectified_score(double p, double iou_raw, double beta) {
  const double u = std::clamp((iou_raw + 1) / 2, 0.0, 1.0);
  return std::pow(p, 1 - beta) * std::pow(u, beta);
}

std::vector<Detection> decode(const HeadOutputs& outputs, const GridConfig& grid,
                              const DecodeConfig& cfg) {
  cfg.validate();
  const Tensor4f& hm = outputs.heatmap;
  const Index h = hm.h(), w = hm.w();
  for (const Tensor4f* m : {&outputs.offset, &outputs.height, &outputs.size,
                            &outputs.yaw, &outputs.iou}) {
    if (m->h() != h || m->w() != w) {
      throw ShapeError("decode: map " + m->shape_string() + " vs heatmap " +
                       hm.shape_string());
    }
  }
  if (hm.c() > kNumClasses) throw ShapeError("decode: too many heatmap classes");
  const double cell = grid.grid_size * static_cast<double>(cfg.output_stride);

  struct Peak {
    double p;
    int class_id;
    Index y, x;
  };
  std::vector<Peak> peaks;
  Eigen::MatrixXd prob(h, w);
  for (Index c = 0; c < hm.c(); ++c) {
    prob = hm.channel(0, c).cast<double>().unaryExpr(&logistic);
    for (Index y = 0; y < h; ++y) {
      for (Index x = 0; x < w; ++x) {
        const double v = prob(y, x);
        bool peak = true;
        for (Index yy = std::max<Index>(0, y - 1); yy <= std::min(h - 1, y + 1) && peak; ++yy) {
          for (Index xx = std::max<Index>(0, x - 1); xx <= std::min(w - 1, x + 1); ++xx) {
            if (prob(yy, xx) > v) {
              peak = false;
              break;
            }
          }
        }
        if (peak) peaks.push_back({v, static_cast<int>(c), y, x});
      }
    }
  }
  const auto k = std::min<std::size_t>(peaks.size(), static_cast<std::size_t>(cfg.top_k));
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const Peak& a, const Peak& b) { return a.p > b.p; });
  peaks.resize(k);

  std::vector<Detection> candidates;
  for (const Peak& pk : peaks) {
    const double score = rectified_score(
        pk.p, outputs.iou(0, 0, pk.y, pk.x),
        cfg.beta[static_cast<std::size_t>(pk.class_id)]);
    if (score < cfg.score_threshold) continue;
    const double cx = (static_cast<double>(pk.x) + 0.5 + outputs.offset(0, 0, pk.y, pk.x)) * cell +
                      grid.x_range.lo;
    const double cy = (static_cast<double>(pk.y) + 0.5 + outputs.offset(0, 1, pk.y, pk.x)) * cell +
                      grid.y_range.lo;
    const double yaw = std::atan2(static_cast<double>(outputs.yaw(0, 0, pk.y, pk.x)),
                                  static_cast<double>(outputs.yaw(0, 1, pk.y, pk.x)));
    const double l = std::exp(static_cast<double>(outputs.size(0, 0, pk.y, pk.x)));
    const double wd = std::exp(static_cast<double>(outputs.size(0, 1, pk.y, pk.x)));
    const double ht = std::exp(static_cast<double>(outputs.size(0, 2, pk.y, pk.x)));
    const double cz = outputs.height(0, 0, pk.y, pk.x);
    bool finite = true;
    for (double v : {cx, cy, cz, l, wd, ht, yaw}) finite = finite && std::isfinite(v);
    if (!finite || !(l > 0 && wd > 0 && ht > 0)) continue;
    candidates.push_back({Box7d(cx, cy, cz, l, wd, ht, yaw), pk.class_id, score});
  }

  std::vector<Detection> out;
  for (std::size_t i : nms_rotated(candidates, cfg.nms_threshold, true)) {
    out.push_back(candidates[i]);
  }
  return out;
}

}  // namespace finepillar
