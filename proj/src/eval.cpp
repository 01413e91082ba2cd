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

#include "finepillar/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <numbers>
#include <numeric>

namespace finepillar {
namespace {

std::vector<std::size_t> score_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  return order;
}

double box_iou(const Box7d& a, const Box7d& b, IouKind kind) {
  return kind == IouKind::kBev ? rotated_bev_iou(a, b) : iou_3d(a, b);
}

std::string format_value(const std::optional<double>& v) {
  if (!v) return "";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), *v);
  return std::string(buf, res.ptr);
}

std::optional<double> mean_of(const std::vector<double>& values) {
  if (values.empty()) return std::nullopt;
  double s = 0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

}  // namespace

void EvalConfig::validate() const {
  for (double t : iou_thresholds) {
    if (!(t > 0 && t < 1)) throw InputError("eval: IoU thresholds must lie in (0, 1)");
  }
  if (recall_positions < 1) throw InputError("eval: recall_positions must be >= 1");
  if (level1_min_points < 1) throw InputError("eval: level1_min_points must be >= 1");
}

std::vector<int> assign_difficulty(std::span<const LabeledBox> labels,
                                   const EvalConfig& cfg) {
  std::vector<int> levels;
  levels.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i].num_points_inside) {
      throw InputError("label " + std::to_string(i) + " has no num_points");
    }
    const int n = *labels[i].num_points_inside;
    levels.push_back(n >= cfg.level1_min_points ? 1 : (n >= 1 ? 2 : 0));
  }
  return levels;
}

std::vector<MatchResult> match_detections(std::span<const Detection> dets,
                                          std::span<const Box7d> gts,
                                          double iou_threshold, IouKind kind,
                                          const std::vector<bool>& scored) {
  if (!scored.empty() && scored.size() != gts.size()) {
    throw ShapeError("match_detections: scored flags do not match ground truth");
  }
  std::vector<MatchResult> out(dets.size());
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t d : score_order(dets)) {
    int best = -1;
    bool best_scored = false;
    double best_iou = 0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double iou = box_iou(dets[d].box, gts[g], kind);
      if (iou < iou_threshold) continue;
      const bool s = scored.empty() || scored[g];
      // Scored ground truth wins over unscored; then higher IoU.
      if (best < 0 || (s && !best_scored) || (s == best_scored && iou > best_iou)) {
        best = static_cast<int>(g);
        best_scored = s;
        best_iou = iou;
      }
    }
    if (best < 0) continue;
    taken[static_cast<std::size_t>(best)] = true;
    MatchResult& m = out[d];
    m.matched_gt = best;
    if (!best_scored) {
      m.ignored = true;
      continue;
    }
    m.is_tp = true;
    m.heading_weight =
        1.0 - heading_error(dets[d].box.yaw, gts[static_cast<std::size_t>(best)].yaw) /
                  std::numbers::pi;
  }
  return out;
}

std::optional<double> average_precision(const std::vector<bool>& tp, Index num_gt,
                                        int recall_positions,
                                        std::span<const double> weights) {
  if (num_gt <= 0) return std::nullopt;
  if (recall_positions < 1) throw InputError("recall_positions must be >= 1");
  if (!weights.empty() && weights.size() != tp.size()) {
    throw ShapeError("average_precision: weights do not match detections");
  }
  const std::size_t n = tp.size();
  std::vector<double> precision(n), recall(n);
  double mass = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (tp[i]) mass += weights.empty() ? 1.0 : weights[i];
    precision[i] = mass / static_cast<double>(i + 1);
    recall[i] = mass / static_cast<double>(num_gt);
  }
  // Suffix maximum turns precision into the interpolated envelope.
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);

  double sum = 0;
  std::size_t j = 0;
  for (int k = 1; k <= recall_positions; ++k) {
    const double r = static_cast<double>(k) / recall_positions;
    while (j < n && recall[j] < r - 1e-12) ++j;
    if (j < n) sum += precision[j];
  }
  return sum / recall_positions;
}

const EvalCell& EvalResult::cell(int class_id, int level) const {
  for (const EvalCell& c : cells) {
    if (c.class_id == class_id && c.level == level) return c;
  }
  throw DefectError("no evaluation cell for class " + std::to_string(class_id) +
                    " level " + std::to_string(level));
}

EvalResult evaluate(std::span<const EvalScene> scenes, const EvalConfig& cfg) {
  cfg.validate();
  std::vector<std::vector<int>> levels;
  for (const EvalScene& s : scenes) levels.push_back(assign_difficulty(s.labels, cfg));

  EvalResult result;
  std::array<std::vector<double>, kNumLevels> aps, aphs;
  for (int cls = 0; cls < kNumClasses; ++cls) {
    for (int level = 1; level <= kNumLevels; ++level) {
      struct Scored {
        double score;
        bool tp;
        double weight;
      };
      std::vector<Scored> pooled;
      EvalCell cell;
      cell.class_id = cls;
      cell.level = level;
      for (std::size_t si = 0; si < scenes.size(); ++si) {
        std::vector<Detection> dets;
        for (const Detection& d : scenes[si].detections) {
          if (d.class_id == cls) dets.push_back(d);
        }
        std::vector<Box7d> gts;
        std::vector<bool> scored;
        for (std::size_t g = 0; g < scenes[si].labels.size(); ++g) {
          if (scenes[si].labels[g].class_id != cls) continue;
          gts.push_back(scenes[si].labels[g].box);
          const int lv = levels[si][g];
          const bool s = lv != 0 && lv <= level;
          scored.push_back(s);
          cell.num_gt += s;
        }
        const auto matches =
            match_detections(dets, gts, cfg.iou_thresholds[static_cast<std::size_t>(cls)],
                             cfg.iou_kind, scored);
        for (std::size_t d : score_order(dets)) {
          if (matches[d].ignored) continue;
          pooled.push_back({dets[d].score, matches[d].is_tp, matches[d].heading_weight});
        }
      }
      std::stable_sort(pooled.begin(), pooled.end(),
                       [](const Scored& a, const Scored& b) { return a.score > b.score; });
      cell.num_det = static_cast<Index>(pooled.size());
      std::vector<bool> tp(pooled.size());
      std::vector<double> weights(pooled.size());
      for (std::size_t i = 0; i < pooled.size(); ++i) {
        tp[i] = pooled[i].tp;
        weights[i] = pooled[i].weight;
      }
      cell.ap = average_precision(tp, cell.num_gt, cfg.recall_positions);
      cell.aph = average_precision(tp, cell.num_gt, cfg.recall_positions, weights);
      if (cell.ap) {
        aps[static_cast<std::size_t>(level - 1)].push_back(*cell.ap);
        aphs[static_cast<std::size_t>(level - 1)].push_back(*cell.aph);
      }
      result.cells.push_back(cell);
    }
  }
  for (std::size_t l = 0; l < kNumLevels; ++l) {
    result.mean_ap[l] = mean_of(aps[l]);
    result.mean_aph[l] = mean_of(aphs[l]);
  }
  return result;
}

std::string eval_to_csv(const EvalResult& result) {
  std::string out = "class,level,AP,APH\n";
  for (const EvalCell& c : result.cells) {
    out += std::string(class_name(c.class_id)) + ",LEVEL_" + std::to_string(c.level) +
           "," + format_value(c.ap) + "," + format_value(c.aph) + "\n";
  }
  for (std::size_t l = 0; l < kNumLevels; ++l) {
    out += "mean,LEVEL_" + std::to_string(l + 1) + "," + format_value(result.mean_ap[l]) +
           "," + format_value(result.mean_aph[l]) + "\n";
  }
  return out;
}

std::string eval_summary(const EvalResult& result) {
  std::string out;
  char line[160];
  for (const EvalCell& c : result.cells) {
    if (c.ap) {
      std::snprintf(line, sizeof(line), "%-10s LEVEL_%d  AP %.4f  APH %.4f  (gt %lld, det %lld)\n",
                    class_name(c.class_id), c.level, *c.ap, *c.aph,
                    static_cast<long long>(c.num_gt), static_cast<long long>(c.num_det));
    } else {
      std::snprintf(line, sizeof(line), "%-10s LEVEL_%d  no ground truth\n",
                    class_name(c.class_id), c.level);
    }
    out += line;
  }
  for (std::size_t l = 0; l < kNumLevels; ++l) {
    if (result.mean_ap[l]) {
      std::snprintf(line, sizeof(line), "%-10s LEVEL_%zu  mAP %.4f  mAPH %.4f\n", "mean", l + 1,
                    *result.mean_ap[l], *result.mean_aph[l]);
    } else {
      std::snprintf(line, sizeof(line), "%-10s LEVEL_%zu  undefined\n", "mean", l + 1);
    }
    out += line;
  }
  return out;
}

}  // namespace finepillar
