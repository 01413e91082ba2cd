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

// Independent reference implementations used by the unit and acceptance
// tests. They favour obviousness over speed and share no code paths with
// the library beyond its data types.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <span>
#include <tuple>
#include <vector>

#include "finepillar/geom.hpp"
#include "finepillar/head.hpp"
#include "finepillar/pfe.hpp"
#include "finepillar/pillarize.hpp"
#include "finepillar/rng.hpp"
#include "finepillar/tensor.hpp"
#include "finepillar/weights.hpp"

namespace oracle {

using finepillar::Box7d;
using finepillar::Index;
using finepillar::Tensor4f;

// ---- geometry --------------------------------------------------------------

inline bool inside_bev(const Box7d& b, double x, double y) {
  const double dx = x - b.cx, dy = y - b.cy;
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  return std::abs(u) <= b.length / 2 && std::abs(v) <= b.width / 2;
}

inline bool inside_z(const Box7d& b, double z) {
  return std::abs(z - b.cz) <= b.height / 2;
}

inline void bev_bounds(const Box7d& b, double& x0, double& x1, double& y0, double& y1) {
  const double r = std::hypot(b.length, b.width) / 2;
  x0 = b.cx - r;
  x1 = b.cx + r;
  y0 = b.cy - r;
  y1 = b.cy + r;
}

/// Box footprint with its rotation precomputed for fast repeated tests.
struct BevFrame {
  explicit BevFrame(const Box7d& b)
      : cx(b.cx), cy(b.cy), c(std::cos(b.yaw)), s(std::sin(b.yaw)),
        hl(b.length / 2), hw(b.width / 2) {}
  bool contains(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    return std::abs(c * dx + s * dy) <= hl && std::abs(-s * dx + c * dy) <= hw;
  }
  double cx, cy, c, s, hl, hw;
};

/// BEV IoU by stratified sampling: one jittered point in each cell of a
/// `grid` x `grid` lattice over the overlap of the two bounding squares.
inline double mc_bev_iou(const Box7d& a, const Box7d& b, int grid,
                         finepillar::Rng& rng) {
  double ax0, ax1, ay0, ay1, bx0, bx1, by0, by1;
  bev_bounds(a, ax0, ax1, ay0, ay1);
  bev_bounds(b, bx0, bx1, by0, by1);
  const double x0 = std::max(ax0, bx0), x1 = std::min(ax1, bx1);
  const double y0 = std::max(ay0, by0), y1 = std::min(ay1, by1);
  const double union_exact = a.length * a.width + b.length * b.width;
  if (x0 >= x1 || y0 >= y1) return 0.0;
  const BevFrame fa(a), fb(b);
  const double cw = (x1 - x0) / grid, ch = (y1 - y0) / grid;
  long long both = 0;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      const double x = x0 + (i + rng.uniform()) * cw;
      const double y = y0 + (j + rng.uniform()) * ch;
      both += fa.contains(x, y) && fb.contains(x, y);
    }
  }
  const double inter = static_cast<double>(both) * cw * ch;
  return inter / (union_exact - inter);
}

/// 3D IoU by stratified sampling on a `grid`^3 lattice over the joint box.
inline double mc_iou_3d(const Box7d& a, const Box7d& b, int grid, finepillar::Rng& rng) {
  double ax0, ax1, ay0, ay1, bx0, bx1, by0, by1;
  bev_bounds(a, ax0, ax1, ay0, ay1);
  bev_bounds(b, bx0, bx1, by0, by1);
  const double x0 = std::max(ax0, bx0), x1 = std::min(ax1, bx1);
  const double y0 = std::max(ay0, by0), y1 = std::min(ay1, by1);
  const double z0 = std::max(a.cz - a.height / 2, b.cz - b.height / 2);
  const double z1 = std::min(a.cz + a.height / 2, b.cz + b.height / 2);
  if (x0 >= x1 || y0 >= y1 || z0 >= z1) return 0.0;
  const BevFrame fa(a), fb(b);
  const double cw = (x1 - x0) / grid, ch = (y1 - y0) / grid, cd = (z1 - z0) / grid;
  long long both = 0;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      for (int k = 0; k < grid; ++k) {
        const double x = x0 + (i + rng.uniform()) * cw;
        const double y = y0 + (j + rng.uniform()) * ch;
        const double z = z0 + (k + rng.uniform()) * cd;
        both += fa.contains(x, y) && fb.contains(x, y) && inside_z(a, z) && inside_z(b, z);
      }
    }
  }
  const double inter = static_cast<double>(both) * cw * ch * cd;
  const double va = a.length * a.width * a.height, vb = b.length * b.width * b.height;
  return inter / (va + vb - inter);
}

/// Repeatedly keeps the best remaining detection (ties: lower index) and
/// removes what it suppresses.
inline std::vector<std::size_t> nms_reference(const std::vector<finepillar::Detection>& dets,
                                              double threshold, bool per_class) {
  std::vector<bool> alive(dets.size(), true);
  std::vector<std::size_t> kept;
  while (true) {
    std::size_t best = dets.size();
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (alive[i] && (best == dets.size() || dets[i].score > dets[best].score)) best = i;
    }
    if (best == dets.size()) break;
    kept.push_back(best);
    alive[best] = false;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (!alive[i]) continue;
      if (per_class && dets[i].class_id != dets[best].class_id) continue;
      if (finepillar::rotated_bev_iou(dets[i].box, dets[best].box) > threshold) alive[i] = false;
    }
  }
  return kept;
}

// ---- tensor ops ---------------------------------------------------------------

/// Value plus the magnitude of everything summed into it; comparisons are
/// relative to that magnitude so cancellation does not inflate errors.
struct Accum {
  double value = 0;
  double magnitude = 0;
};

inline bool close_rel(double got, const Accum& ref, double tol) {
  return std::abs(got - ref.value) <= tol * std::max(1e-30, ref.magnitude);
}

inline std::vector<Accum> naive_conv2d(const Tensor4f& x, const Tensor4f& w,
                                       const finepillar::Vector<float>& b, Index stride,
                                       Index pad, Index& oh, Index& ow) {
  oh = (x.h() + 2 * pad - w.h()) / stride + 1;
  ow = (x.w() + 2 * pad - w.w()) / stride + 1;
  std::vector<Accum> out;
  for (Index n = 0; n < x.n(); ++n)
    for (Index co = 0; co < w.n(); ++co)
      for (Index oy = 0; oy < oh; ++oy)
        for (Index ox = 0; ox < ow; ++ox) {
          Accum a{b[co], std::abs(static_cast<double>(b[co]))};
          for (Index ci = 0; ci < w.c(); ++ci)
            for (Index ky = 0; ky < w.h(); ++ky)
              for (Index kx = 0; kx < w.w(); ++kx) {
                const Index iy = oy * stride - pad + ky, ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= x.h() || ix < 0 || ix >= x.w()) continue;
                const double t = static_cast<double>(w(co, ci, ky, kx)) * x(n, ci, iy, ix);
                a.value += t;
                a.magnitude += std::abs(t);
              }
          out.push_back(a);
        }
  return out;
}

inline double bilinear_sample(const Tensor4f& x, Index n, Index c, Index oy, Index ox,
                              Index out_h, Index out_w) {
  auto coord = [](Index o, Index in, Index out) {
    const double s = std::max(0.0, (o + 0.5) * static_cast<double>(in) / out - 0.5);
    const Index i0 = std::min<Index>(static_cast<Index>(s), in - 1);
    return std::tuple<Index, Index, double>(i0, std::min(i0 + 1, in - 1), s - i0);
  };
  const auto [y0, y1, fy] = coord(oy, x.h(), out_h);
  const auto [x0, x1, fx] = coord(ox, x.w(), out_w);
  return (1 - fy) * ((1 - fx) * x(n, c, y0, x0) + fx * x(n, c, y0, x1)) +
         fy * ((1 - fx) * x(n, c, y1, x0) + fx * x(n, c, y1, x1));
}

// ---- height encoding -----------------------------------------------------------

inline long double hpe_component(double z, double scale, int i, bool cosine) {
  const long double pi = 3.141592653589793238462643383279502884L;
  const long double arg = std::pow(2.0L, i) * pi * (static_cast<long double>(z) / scale);
  return cosine ? std::cos(arg) : std::sin(arg);
}

// ---- plain pillars ---------------------------------------------------------------

/// Value and accumulated magnitude images of the plain-pillar reference.
struct PlainPillars {
  finepillar::Tensor4<double> value;
  finepillar::Tensor4<double> magnitude;
};

/// Single-slice pillar encoder written from scratch: bucket points per
/// (ix, iy) column, decorate, run both VFE layers with scalar loops, scatter.
inline PlainPillars plain_pillar_image(const finepillar::PointCloud& cloud,
                                       const finepillar::GridConfig& grid,
                                       const finepillar::WeightStore& weights,
                                       Index vfe1, Index vfe2) {
  const Index nx = grid.nx(), ny = grid.ny();
  std::map<std::pair<Index, Index>, std::vector<Index>> pillars;
  std::vector<std::pair<Index, Index>> order;
  for (Index i = 0; i < cloud.count(); ++i) {
    const double x = cloud.points(i, 0), y = cloud.points(i, 1), z = cloud.points(i, 2);
    if (x < grid.x_range.lo || x >= grid.x_range.hi || y < grid.y_range.lo ||
        y >= grid.y_range.hi || z < grid.z_range.lo || z > grid.z_range.hi) {
      continue;
    }
    const Index ix = std::min<Index>(static_cast<Index>((x - grid.x_range.lo) / grid.grid_size), nx - 1);
    const Index iy = std::min<Index>(static_cast<Index>((y - grid.y_range.lo) / grid.grid_size), ny - 1);
    auto key = std::make_pair(ix, iy);
    auto it = pillars.find(key);
    if (it == pillars.end()) {
      if (static_cast<Index>(order.size()) >= grid.max_occupied_subpillars) continue;
      it = pillars.emplace(key, std::vector<Index>{}).first;
      order.push_back(key);
    }
    if (static_cast<Index>(it->second.size()) < grid.max_points_per_subpillar) it->second.push_back(i);
  }

  const auto& w1 = weights.tensors().at("pfe.vfe1.weight").values;
  const auto& b1 = weights.tensors().at("pfe.vfe1.bias").values;
  const auto& s1 = weights.tensors().at("pfe.vfe1.norm.scale").values;
  const auto& t1 = weights.tensors().at("pfe.vfe1.norm.shift").values;
  const auto& w2 = weights.tensors().at("pfe.vfe2.weight").values;
  const auto& b2 = weights.tensors().at("pfe.vfe2.bias").values;
  const auto& s2 = weights.tensors().at("pfe.vfe2.norm.scale").values;
  const auto& t2 = weights.tensors().at("pfe.vfe2.norm.shift").values;
  const Index half = vfe1 / 2;
  const auto uhalf = static_cast<std::size_t>(half);

  PlainPillars out{finepillar::Tensor4<double>(1, vfe2, ny, nx),
                   finepillar::Tensor4<double>(1, vfe2, ny, nx)};
  for (const auto& key : order) {
    const auto& idx = pillars[key];
    double mx = 0, my = 0, mz = 0;
    for (Index i : idx) {
      mx += cloud.points(i, 0);
      my += cloud.points(i, 1);
      mz += cloud.points(i, 2);
    }
    const double m = static_cast<double>(idx.size());
    mx /= m;
    my /= m;
    mz /= m;
    const double cx = grid.x_range.lo + (key.first + 0.5) * grid.grid_size;
    const double cy = grid.y_range.lo + (key.second + 0.5) * grid.grid_size;
    const double cz = (grid.z_range.lo + grid.z_range.hi) / 2;

    // h1 values with their magnitudes, per point.
    std::vector<std::vector<double>> h1(idx.size(), std::vector<double>(uhalf));
    std::vector<std::vector<double>> g1(idx.size(), std::vector<double>(uhalf));
    for (std::size_t p = 0; p < idx.size(); ++p) {
      const Index i = idx[p];
      const double px = cloud.points(i, 0), py = cloud.points(i, 1), pz = cloud.points(i, 2);
      const double f[10] = {px,      py,      pz,      cloud.points(i, 3), px - mx,
                            py - my, pz - mz, px - cx, py - cy,            pz - cz};
      // Decorations are offsets of large coordinates; charge their magnitude.
      const double fm[10] = {std::abs(px), std::abs(py), std::abs(pz), std::abs(f[3]),
                             std::abs(px) + std::abs(mx), std::abs(py) + std::abs(my),
                             std::abs(pz) + std::abs(mz), std::abs(px) + std::abs(cx),
                             std::abs(py) + std::abs(cy), std::abs(pz) + std::abs(cz)};
      for (Index o = 0; o < half; ++o) {
        double acc = b1[o], mag = std::abs(b1[o]);
        for (int k = 0; k < 10; ++k) {
          acc += f[k] * w1[k * half + o];
          mag += fm[k] * std::abs(w1[k * half + o]);
        }
        const auto uo = static_cast<std::size_t>(o);
        h1[p][uo] = std::max(0.0, acc * s1[o] + t1[o]);
        g1[p][uo] = mag * std::abs(s1[o]) + std::abs(t1[o]);
      }
    }
    std::vector<double> pooled(uhalf, -1e300), pooled_mag(uhalf, 0);
    for (std::size_t p = 0; p < idx.size(); ++p)
      for (std::size_t o = 0; o < uhalf; ++o) {
        pooled[o] = std::max(pooled[o], h1[p][o]);
        pooled_mag[o] = std::max(pooled_mag[o], g1[p][o]);
      }
    std::vector<double> best(static_cast<std::size_t>(vfe2), -1e300);
    std::vector<double> best_mag(static_cast<std::size_t>(vfe2), 0);
    for (std::size_t p = 0; p < idx.size(); ++p) {
      for (Index o = 0; o < vfe2; ++o) {
        double acc = b2[o], mag = std::abs(b2[o]);
        for (Index k = 0; k < half; ++k) {
          const auto uk = static_cast<std::size_t>(k);
          acc += h1[p][uk] * w2[k * vfe2 + o] + pooled[uk] * w2[(half + k) * vfe2 + o];
          mag += g1[p][uk] * std::abs(w2[k * vfe2 + o]) +
                 pooled_mag[uk] * std::abs(w2[(half + k) * vfe2 + o]);
        }
        const auto uo = static_cast<std::size_t>(o);
        best[uo] = std::max(best[uo], std::max(0.0, acc * s2[o] + t2[o]));
        best_mag[uo] = std::max(best_mag[uo], mag * std::abs(s2[o]) + std::abs(t2[o]));
      }
    }
    for (Index o = 0; o < vfe2; ++o) {
      out.value(0, o, key.second, key.first) = best[static_cast<std::size_t>(o)];
      out.magnitude(0, o, key.second, key.first) = best_mag[static_cast<std::size_t>(o)];
    }
  }
  return out;
}

// ---- head encoding ---------------------------------------------------------------

/// Head maps that decode exactly to `labels`: a saturated logit at each
/// center cell, strongly negative logits elsewhere, and the inverse of every
/// regression transform at the center.
inline finepillar::HeadOutputs plant_head_outputs(std::span<const finepillar::LabeledBox> labels,
                                                  const finepillar::GridConfig& grid,
                                                  Index stride, Index num_classes) {
  const Index w = grid.nx() / stride, h = grid.ny() / stride;
  const double cell = grid.grid_size * static_cast<double>(stride);
  finepillar::HeadOutputs o{Tensor4f::constant(1, num_classes, h, w, -40.0f),
                            Tensor4f(1, 2, h, w),
                            Tensor4f(1, 1, h, w),
                            Tensor4f(1, 3, h, w),
                            Tensor4f(1, 2, h, w),
                            Tensor4f::constant(1, 1, h, w, 1.0f)};
  for (const auto& l : labels) {
    const double u = (l.box.cx - grid.x_range.lo) / cell;
    const double v = (l.box.cy - grid.y_range.lo) / cell;
    const auto ix = static_cast<Index>(std::floor(u)), iy = static_cast<Index>(std::floor(v));
    o.heatmap(0, l.class_id, iy, ix) = 40.0f;
    o.offset(0, 0, iy, ix) = static_cast<float>(u - (static_cast<double>(ix) + 0.5));
    o.offset(0, 1, iy, ix) = static_cast<float>(v - (static_cast<double>(iy) + 0.5));
    o.height(0, 0, iy, ix) = static_cast<float>(l.box.cz);
    o.size(0, 0, iy, ix) = static_cast<float>(std::log(l.box.length));
    o.size(0, 1, iy, ix) = static_cast<float>(std::log(l.box.width));
    o.size(0, 2, iy, ix) = static_cast<float>(std::log(l.box.height));
    o.yaw(0, 0, iy, ix) = static_cast<float>(std::sin(l.box.yaw));
    o.yaw(0, 1, iy, ix) = static_cast<float>(std::cos(l.box.yaw));
  }
  return o;
}

// ---- random helpers -------------------------------------------------------------

inline Tensor4f random_tensor(finepillar::Rng& rng, Index n, Index c, Index h, Index w,
                              double lo = -1, double hi = 1) {
  Tensor4f t(n, c, h, w);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

inline Box7d random_box(finepillar::Rng& rng, double spread) {
  return Box7d(rng.uniform(-spread, spread), rng.uniform(-spread, spread),
               rng.uniform(-0.5, 0.5), rng.uniform(0.3, 5.0), rng.uniform(0.3, 3.0),
               rng.uniform(0.3, 2.5), rng.uniform(-std::numbers::pi, std::numbers::pi));
}

}  // namespace oracle
