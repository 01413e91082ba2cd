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


// Acceptance runner: one PASS/FAIL line per criterion.
//
//   acceptance [--criterion N] [--tool PATH]
//
// Without --criterion every criterion runs. Exit status is 0 only when every
// selected criterion passes.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "finepillar/dfsa.hpp"
#include "finepillar/eval.hpp"
#include "finepillar/geom.hpp"
#include "finepillar/head.hpp"
#include "finepillar/pfe.hpp"
#include "finepillar/pillarize.hpp"
#include "finepillar/pipeline.hpp"
#include "finepillar/scene.hpp"
#include "finepillar/tensor.hpp"
#include "oracles/eval_fixture.hpp"
#include "oracles/oracles.hpp"

namespace fs = std::filesystem;
using namespace finepillar;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  /// Records a sub-check; the criterion passes only if all of them do.
  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Vector<float> random_vector(Rng& rng, Index n) {
  Vector<float> v(n);
  for (Index i = 0; i < n; ++i) v[i] = static_cast<float>(rng.uniform(-1, 1));
  return v;
}

// ---- 1: geometry ------------------------------------------------------------------

Outcome geometry(const std::string&) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101), mc(102);
  double worst_bev = 0, worst_3d = 0;
  for (int i = 0; i < 1000; ++i) {
    const Box7d a = oracle::random_box(rng, 1.5), b = oracle::random_box(rng, 1.5);
    worst_bev = std::max(worst_bev, std::abs(rotated_bev_iou(a, b) - oracle::mc_bev_iou(a, b, 1000, mc)));
    worst_3d = std::max(worst_3d, std::abs(iou_3d(a, b) - oracle::mc_iou_3d(a, b, 100, mc)));
  }
  o.check(worst_bev <= 2e-3, "BEV IoU vs 10^6-sample oracle on 1000 pairs, max error " +
                                 fmt("%.2e", worst_bev));
  o.check(worst_3d <= 2e-3, "3D IoU vs 10^6-sample oracle on 1000 pairs, max error " +
                                fmt("%.2e", worst_3d));
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<Detection> dets;
    const int n = 1 + static_cast<int>(rng.index(40));
    for (int i = 0; i < n; ++i) {
      // Coarse scores produce ties, exercising the index tie-break.
      dets.push_back({oracle::random_box(rng, 4), static_cast<int>(rng.index(3)),
                      std::round(rng.uniform() * 20) / 20});
    }
    const double thr = rng.uniform(0.05, 0.9);
    const bool per_class = rng.index(2) == 1;
    mismatches += nms_rotated(dets, thr, per_class) != oracle::nms_reference(dets, thr, per_class);
  }
  o.check(mismatches == 0, "NMS equals the O(n^2) oracle on 1000 instances, mismatches " +
                               std::to_string(mismatches));
  const double secs = seconds_since(t0);
  o.check(secs <= 60, "runtime " + fmt("%.1f", secs) + " s <= 60 s");
  return o;
}

// ---- 2: tensor ops ----------------------------------------------------------------

Outcome tensor_ops(const std::string&) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(201);
  constexpr int kShapes = 60;
  constexpr double kTol = 1e-5;

  int bad = 0;
  for (int t = 0; t < kShapes; ++t) {
    const Index n = 1 + rng.index(40), ci = 1 + rng.index(64), co = 1 + rng.index(64);
    RowMatrix<float> x(n, ci), w(ci, co);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = static_cast<float>(rng.uniform(-2, 2));
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<float>(rng.uniform(-1, 1));
    const Vector<float> b = random_vector(rng, co);
    const RowMatrix<float> y = linear(x, w, b);
    for (Index r = 0; r < n; ++r)
      for (Index c = 0; c < co; ++c) {
        oracle::Accum a{b[c], std::abs(static_cast<double>(b[c]))};
        for (Index k = 0; k < ci; ++k) {
          const double term = static_cast<double>(x(r, k)) * w(k, c);
          a.value += term;
          a.magnitude += std::abs(term);
        }
        bad += !oracle::close_rel(y(r, c), a, kTol);
      }
  }
  o.check(bad == 0, "linear on " + std::to_string(kShapes) + " shapes, bad elements " +
                        std::to_string(bad));

  bad = 0;
  for (int t = 0; t < kShapes; ++t) {
    const Index k = (t % 3 == 0) ? 1 : (t % 3 == 1 ? 3 : 7);
    const Index ci = 1 + rng.index(8), co = 1 + rng.index(8);
    const Index h = k + rng.index(12), w = k + rng.index(12);
    const Index stride = 1 + rng.index(2), pad = k == 1 ? rng.index(2) : k / 2;
    const Tensor4f x = oracle::random_tensor(rng, 1 + rng.index(2), ci, h, w);
    const Tensor4f wt = oracle::random_tensor(rng, co, ci, k, k);
    const Vector<float> b = random_vector(rng, co);
    Index oh = 0, ow = 0;
    const auto ref = oracle::naive_conv2d(x, wt, b, stride, pad, oh, ow);
    const Tensor4f y = conv2d(x, wt, b, stride, pad);
    if (y.h() != oh || y.w() != ow) {
      ++bad;
      continue;
    }
    for (Index i = 0; i < y.size(); ++i) {
      bad += !oracle::close_rel(y.data()[i], ref[static_cast<std::size_t>(i)], kTol);
    }
  }
  o.check(bad == 0, "conv2d on " + std::to_string(kShapes) + " shapes, bad elements " +
                        std::to_string(bad));

  bad = 0;
  for (int t = 0; t < kShapes; ++t) {
    const Tensor4f x = oracle::random_tensor(rng, 1 + rng.index(3), 1 + rng.index(32),
                                             1 + rng.index(12), 1 + rng.index(12));
    const Tensor4f mx = channel_max_pool(x), av = channel_avg_pool(x);
    for (Index n = 0; n < x.n(); ++n)
      for (Index yy = 0; yy < x.h(); ++yy)
        for (Index xx = 0; xx < x.w(); ++xx) {
          double best = -1e300;
          oracle::Accum sum;
          for (Index c = 0; c < x.c(); ++c) {
            best = std::max(best, static_cast<double>(x(n, c, yy, xx)));
            sum.value += x(n, c, yy, xx);
            sum.magnitude += std::abs(x(n, c, yy, xx));
          }
          sum.value /= static_cast<double>(x.c());
          sum.magnitude /= static_cast<double>(x.c());
          bad += mx(n, 0, yy, xx) != static_cast<float>(best);
          bad += !oracle::close_rel(av(n, 0, yy, xx), sum, kTol);
        }
  }
  o.check(bad == 0, "channel max/avg pooling on " + std::to_string(kShapes) +
                        " shapes, bad elements " + std::to_string(bad));

  bad = 0;
  for (int t = 0; t < kShapes; ++t) {
    const Tensor4f x = oracle::random_tensor(rng, 1, 1 + rng.index(4), 1 + rng.index(9),
                                             1 + rng.index(9));
    const Index f = 1 + rng.index(4);
    const Tensor4f bi = upsample(x, f, ResizeMode::kBilinear);
    const Tensor4f nn = upsample(x, f, ResizeMode::kNearest);
    for (Index c = 0; c < x.c(); ++c)
      for (Index i = 0; i < bi.h(); ++i)
        for (Index j = 0; j < bi.w(); ++j) {
          const double ref = oracle::bilinear_sample(x, 0, c, i, j, bi.h(), bi.w());
          // Interpolation weights sum to one, so the magnitude is bounded by max |x|.
          const double mag = std::max({std::abs(ref), 1e-30,
                                       static_cast<double>(x.channel(0, c).cwiseAbs().maxCoeff())});
          bad += std::abs(bi(0, c, i, j) - ref) > kTol * mag;
          bad += nn(0, c, i, j) != x(0, c, i / f, j / f);
        }
  }
  o.check(bad == 0, "upsample bilinear/nearest on " + std::to_string(kShapes) +
                        " shapes, bad elements " + std::to_string(bad));

  const double secs = seconds_since(t0);
  o.check(secs <= 30, "runtime " + fmt("%.1f", secs) + " s <= 30 s");
  return o;
}

// ---- 3: plain-pillar reduction ------------------------------------------------------

WeightStore randomized_norms(WeightStore w, std::uint64_t seed) {
  Rng rng(seed);
  for (const char* layer : {"pfe.vfe1", "pfe.vfe2"}) {
    for (const char* part : {".norm.scale", ".norm.shift"}) {
      const std::string name = std::string(layer) + part;
      WeightTensor t = w.tensors().at(name);
      const bool scale = std::string(part) == ".norm.scale";
      for (Index i = 0; i < t.values.size(); ++i) {
        t.values[i] = static_cast<float>(scale ? rng.uniform(0.5, 1.5) : rng.uniform(-0.2, 0.3));
      }
      w.set(name, t.shape, t.values);
    }
  }
  return w;
}

Outcome plain_pillars(const std::string&) {
  Outcome o;
  PipelineConfig cfg;
  cfg.grid.n_sub = 1;
  cfg.pfe.hpe.enabled = false;
  double worst = 0;
  int bad_scenes = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    cfg.seed = 300 + s;
    const WeightStore w = randomized_norms(init_weights(pfe_params(cfg.pfe), cfg.seed), s);
    const PointCloud cloud = synth_scene(synth_config_for(cfg, s)).cloud;
    const SubPillarBatch b = assign_pillars(cloud, cfg.grid);
    const Tensor4f img = scatter_to_pseudo_image(
        b, attach_hpe(vfe_forward(b, w, cfg.pfe), b, cfg.pfe.hpe), cfg.grid);
    const oracle::PlainPillars ref = oracle::plain_pillar_image(
        cloud, cfg.grid, w, cfg.pfe.vfe1_channels, cfg.pfe.vfe2_channels);
    bool ok = img.size() == ref.value.size();
    for (Index i = 0; ok && i < img.size(); ++i) {
      const double err = std::abs(img.data()[i] - ref.value.data()[i]);
      const double rel = err / std::max(1e-30, ref.magnitude.data()[i]);
      if (err > 0) worst = std::max(worst, rel);
      ok = rel <= 1e-6 || err == 0;
    }
    bad_scenes += !ok;
  }
  o.check(bad_scenes == 0, "N_h = 1, no height encoding: pseudo-image equals the plain-pillar "
                           "reference on 20 scenes, worst relative error " + fmt("%.2e", worst));
  return o;
}

// ---- 4: height encoding ----------------------------------------------------------------

Outcome height_encoding(const std::string&) {
  Outcome o;
  double worst = 0, largest = 0;
  int inputs = 0;
  for (int L = 1; L <= 10; ++L) {
    HPEConfig cfg;
    cfg.num_frequencies = L;
    cfg.z_scale = 6.0;
    for (int k = 0; k < 1000; ++k) {
      const double z = -2.0 + 6.0 * k / 999.0;
      const double zp = 4.0 - 6.0 * k / 999.0;
      const Eigen::VectorXd v = height_position_encoding(z, zp, cfg);
      for (int i = 0; i < L; ++i) {
        const double ref[4] = {static_cast<double>(oracle::hpe_component(z, 6.0, i, false)),
                               static_cast<double>(oracle::hpe_component(z, 6.0, i, true)),
                               static_cast<double>(oracle::hpe_component(zp, 6.0, i, false)),
                               static_cast<double>(oracle::hpe_component(zp, 6.0, i, true))};
        const double got[4] = {v[2 * i], v[2 * i + 1], v[2 * (L + i)], v[2 * (L + i) + 1]};
        for (int c = 0; c < 4; ++c) worst = std::max(worst, std::abs(got[c] - ref[c]));
      }
      largest = std::max(largest, v.cwiseAbs().maxCoeff());
      ++inputs;
    }
  }
  o.check(worst <= 1e-9, std::to_string(inputs) + " (z, L) inputs vs long double, max error " +
                             fmt("%.2e", worst));
  o.check(largest <= 1.0, "every component in [-1, 1], max |v| " + fmt("%.17g", largest));
  return o;
}

// ---- 5: occupancy trend ---------------------------------------------------------------

Outcome occupancy(const std::string&) {
  Outcome o;
  PipelineConfig cfg;
  const std::vector<int> n_sub{1, 8};
  const std::vector<double> sizes{0.32, 0.16};
  bool quadruple = true, finer_sparser = true, slices_sparser = true;
  double max_grid_factor = 0, max_slice_factor = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const PointCloud cloud = synth_scene(synth_config_for(cfg, s)).cloud;
    const auto rows = sparsity_stats(cloud, cfg.grid, n_sub, sizes);
    auto row = [&](double size, int n) {
      return *std::find_if(rows.begin(), rows.end(),
                           [&](const SparsityRow& r) { return r.grid_size == size && r.n_sub == n; });
    };
    for (int n : n_sub) {
      const SparsityRow coarse = row(0.32, n), fine = row(0.16, n);
      quadruple = quadruple && fine.total_cells == 4 * coarse.total_cells;
      const double f = static_cast<double>(fine.occupied_cells) / coarse.occupied_cells;
      max_grid_factor = std::max(max_grid_factor, f);
      finer_sparser = finer_sparser && fine.occupied_cells < 4 * coarse.occupied_cells &&
                      fine.occupied_cells > coarse.occupied_cells;
    }
    for (double size : sizes) {
      const SparsityRow one = row(size, 1), eight = row(size, 8);
      const double f = static_cast<double>(eight.occupied_cells) / one.occupied_cells;
      max_slice_factor = std::max(max_slice_factor, f);
      slices_sparser = slices_sparser && eight.occupied_cells < 8 * one.occupied_cells;
    }
  }
  o.check(quadruple, "halving the grid size quadruples total cells on 50 scenes");
  o.check(finer_sparser, "occupied cells grow by a factor in (1, 4), max " +
                             fmt("%.3f", max_grid_factor));
  o.check(slices_sparser, "N_h 1 -> 8 grows occupied sub-pillars by < 8, max " +
                              fmt("%.3f", max_slice_factor));
  return o;
}

// ---- 6: height histograms ---------------------------------------------------------------

Outcome height_profile(const std::string&) {
  Outcome o;
  PipelineConfig cfg;
  const SynthConfig base = synth_config_for(cfg, 0);
  const double mu = base.ground_z_mean, sigma = base.ground_z_stddev;
  double worst_fraction = 1;
  double worst_band = -1e9;
  double lowest = 1e9;
  for (std::uint64_t s = 0; s < 20; ++s) {
    SynthConfig ground = synth_config_for(cfg, s);
    ground.object_counts = {0, 0, 0};
    const PointCloud g = synth_scene(ground).cloud;
    // Bins of sigma / 10 tile [mu - 2 sigma, mu + 2 sigma) exactly.
    std::int64_t within = 0;
    for (const HistogramBin& b : height_histogram(g, sigma / 10, mu - 2 * sigma, mu + 2 * sigma)) {
      within += b.count;
    }
    worst_fraction = std::min(worst_fraction, static_cast<double>(within) / g.count());

    SynthConfig objects = synth_config_for(cfg, s);
    objects.ground_points = 0;
    const Scene sc = synth_scene(objects);
    for (const LabeledBox& l : sc.labels) {
      double lo = 1e9, hi = -1e9;
      const oracle::BevFrame f(Box7d(l.box.cx, l.box.cy, l.box.cz, 1.05 * l.box.length,
                                     1.05 * l.box.width, l.box.height, l.box.yaw));
      for (Index i = 0; i < sc.cloud.count(); ++i) {
        if (!f.contains(sc.cloud.points(i, 0), sc.cloud.points(i, 1))) continue;
        lo = std::min(lo, static_cast<double>(sc.cloud.points(i, 2)));
        hi = std::max(hi, static_cast<double>(sc.cloud.points(i, 2)));
      }
      // Band above ground, in units of the object's configured height.
      worst_band = std::max(worst_band, (hi - mu) - l.box.height);
      lowest = std::min(lowest, lo - mu);
    }
  }
  o.check(worst_fraction > 0.5, "ground points within +-2 sigma, worst scene " +
                                    fmt("%.3f", worst_fraction));
  o.check(worst_band <= 1e-6 && lowest >= -1e-6,
          "object points lie in [ground, ground + object height], max excess " +
              fmt("%.2e", worst_band) + " m, lowest " + fmt("%.2e", lowest) + " m");
  return o;
}

// ---- 7: DFSA contracts ----------------------------------------------------------------

WeightStore without_offsets(const WeightStore& w) {
  WeightStore out;
  for (const auto& [name, t] : w.tensors()) {
    const bool offset = name.ends_with(".bias") || name.ends_with(".norm.shift");
    out.set(name, t.shape,
            offset ? Vector<float>(Vector<float>::Zero(t.values.size())) : t.values);
  }
  return out;
}

Outcome dfsa(const std::string&) {
  Outcome o;
  Rng rng(701);

  float lo = 1, hi = 0;
  for (int t = 0; t < 50; ++t) {
    const WeightStore w = init_weights(sparse_attention_params("a"), static_cast<std::uint64_t>(t));
    const double scale = t % 3 == 0 ? 100 : 1;
    const Tensor4f m = sparse_attention(
        oracle::random_tensor(rng, 1, 1 + rng.index(8), 12, 12, -scale, scale), w, "a");
    lo = std::min(lo, m.data().minCoeff());
    hi = std::max(hi, m.data().maxCoeff());
  }
  o.check(lo > 0 && hi < 1, "attention in (0, 1) on 50 inputs, observed [" + fmt("%.3g", lo) +
                                ", " + fmt("%.9g", hi) + "]");

  bool shapes = true;
  const Tensor4f x = oracle::random_tensor(rng, 1, 4, 64, 96);
  for (const auto& name : dfsa_preset_names()) {
    const DFSAConfig cfg = dfsa_preset(name);
    const Tensor4f y = dfsa_forward(x, cfg, init_weights(dfsa_params("m", cfg, 4), 7), "m");
    shapes = shapes && y.c() == cfg.fused_channels && y.h() == 64 / cfg.stride &&
             y.w() == 96 / cfg.stride;
  }
  o.check(shapes, "output = input / stride for presets " + [] {
    std::string s;
    for (const auto& n : dfsa_preset_names()) s += (s.empty() ? "" : ",") + n;
    return s;
  }());
  {
    const SCBConfig scb = scb_preset("s24_n35", 2);
    const Tensor4f y = scb_forward(oracle::random_tensor(rng, 1, 4, 512, 512), scb,
                                   init_weights(scb_params(scb, 4), 8));
    o.check(y.h() == 256 && y.w() == 256 && y.c() == scb.out_channels(),
            "backbone maps 512x512 to " + std::to_string(y.h()) + "x" + std::to_string(y.w()));
  }

  bool zero_ok = true;
  float zero_worst = 0;
  for (const auto& name : dfsa_preset_names()) {
    DFSAConfig cfg = dfsa_preset(name);
    cfg.branch_channels.assign(cfg.branch_channels.size(), 8);
    cfg.large_channels = 8;
    cfg.fused_channels = 8;
    const WeightStore w = without_offsets(init_weights(dfsa_params("m", cfg, 4), 9));
    const Index margin = receptive_field(cfg) + cfg.max_scale();
    const Index pad = 16;
    Index size = 2 * (pad + margin) + 32;
    size += (cfg.max_scale() - size % cfg.max_scale()) % cfg.max_scale();
    Tensor4f in = oracle::random_tensor(rng, 1, 4, size, size);
    const Index zlo = pad, zhi = size - pad;
    for (Index c = 0; c < 4; ++c) in.channel(0, c).block(zlo, zlo, zhi - zlo, zhi - zlo).setZero();
    const Tensor4f y = dfsa_forward(in, cfg, w, "m");
    const Index s = cfg.stride;
    Index checked = 0;
    for (Index oy = 0; oy < y.h(); ++oy)
      for (Index ox = 0; ox < y.w(); ++ox) {
        if (s * oy < zlo + margin || s * oy + s - 1 >= zhi - margin || s * ox < zlo + margin ||
            s * ox + s - 1 >= zhi - margin) {
          continue;
        }
        ++checked;
        for (Index c = 0; c < y.c(); ++c) zero_worst = std::max(zero_worst, std::abs(y(0, c, oy, ox)));
      }
    zero_ok = zero_ok && checked > 0 && y.data().cwiseAbs().maxCoeff() > 0;
  }
  o.check(zero_ok && zero_worst <= 1e-6f,
          "zero input region stays zero beyond the receptive field, max |y| " +
              fmt("%.2e", zero_worst));

  std::string rf_failures;
  for (const auto& name : dfsa_preset_names()) {
    const DFSAConfig cfg = dfsa_preset(name);
    const Index base = receptive_field(cfg);
    for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
      DFSAConfig more = cfg;
      more.blocks[i] += 1;
      const Index rf = receptive_field(more);
      if (rf <= base) {
        rf_failures += " " + name + ":N" + std::to_string(i + 1) + "+1 gives " +
                       std::to_string(rf) + " (was " + std::to_string(base) + ")";
      }
    }
  }
  o.check(rf_failures.empty(),
          "receptive field strictly increases with every N_i" +
              (rf_failures.empty() ? std::string() : ";" + rf_failures));
  return o;
}

// ---- 8: encode/decode round trip -----------------------------------------------------

Outcome round_trip(const std::string&) {
  Outcome o;
  PipelineConfig cfg;
  DecodeConfig dc = cfg.decode;
  dc.beta = {0, 0, 0};
  int scenes_bad = 0;
  std::size_t boxes = 0;
  double worst_pos = 0, worst_yaw = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    SynthConfig sc = synth_config_for(cfg, s);
    sc.ground_points = 0;
    const Scene scene = synth_scene(sc);
    const HeadOutputs out = oracle::plant_head_outputs(scene.labels, cfg.grid, dc.output_stride,
                                                       kNumClasses);
    const std::vector<Detection> dets = decode(out, cfg.grid, dc);
    bool ok = dets.size() == scene.labels.size();
    std::vector<bool> used(dets.size(), false);
    for (const LabeledBox& l : scene.labels) {
      std::size_t best = dets.size();
      double best_d = 1e300;
      for (std::size_t k = 0; k < dets.size(); ++k) {
        const double d = (dets[k].box.center_bev() - l.box.center_bev()).norm();
        if (d < best_d) best_d = d, best = k;
      }
      if (best == dets.size() || used[best]) {
        ok = false;
        continue;
      }
      used[best] = true;
      const Box7d& b = dets[best].box;
      const double pos = std::max({std::abs(b.cx - l.box.cx), std::abs(b.cy - l.box.cy),
                                   std::abs(b.cz - l.box.cz), std::abs(b.length - l.box.length),
                                   std::abs(b.width - l.box.width),
                                   std::abs(b.height - l.box.height)});
      const double yaw = heading_error(b.yaw, l.box.yaw);
      worst_pos = std::max(worst_pos, pos);
      worst_yaw = std::max(worst_yaw, yaw);
      ok = ok && dets[best].class_id == l.class_id && pos <= 1e-5 && yaw <= 1e-5;
    }
    boxes += scene.labels.size();
    scenes_bad += !ok;
  }
  o.check(scenes_bad == 0, "100 scenes, " + std::to_string(boxes) +
                               " boxes, one detection per box, worst " + fmt("%.2e", worst_pos) +
                               " m / " + fmt("%.2e", worst_yaw) + " rad");
  return o;
}

// ---- 9: metrics -----------------------------------------------------------------------

Outcome metrics(const std::string&) {
  Outcome o;
  const fs::path fixtures = fs::path(FINEPILLAR_TEST_DIR) / "fixtures";
  {
    const auto scenes = oracle::load_eval_fixture(fixtures / "eval_fixture.json");
    std::ifstream in(fixtures / "eval_expected.csv", std::ios::binary);
    std::stringstream expected;
    expected << in.rdbuf();
    o.check(eval_to_csv(evaluate(scenes, EvalConfig{})) == expected.str(),
            "5-scene fixture CSV equals the scripted oracle byte for byte");
  }
  Rng rng(901);
  int violations = 0, cells = 0;
  for (int t = 0; t < 200; ++t) {
    const auto scenes = oracle::random_eval_scenes(rng, 1 + static_cast<int>(rng.index(5)));
    for (IouKind kind : {IouKind::k3d, IouKind::kBev}) {
      EvalConfig ec;
      ec.iou_kind = kind;
      for (const EvalCell& c : evaluate(scenes, ec).cells) {
        if (!c.ap) continue;
        ++cells;
        violations += !c.aph || *c.aph > *c.ap;
      }
    }
  }
  o.check(violations == 0, "APH <= AP on 200 random fixtures (" + std::to_string(cells) +
                               " cells)");
  int imperfect = 0;
  for (int t = 0; t < 20; ++t) {
    auto scenes = oracle::random_eval_scenes(rng, 1 + static_cast<int>(rng.index(5)));
    for (auto& s : scenes) {
      s.detections.clear();
      for (auto& l : s.labels) {
        l.num_points_inside = 10;
        s.detections.push_back({l.box, l.class_id, 1.0});
      }
    }
    for (const EvalCell& c : evaluate(scenes, EvalConfig{}).cells) {
      if (c.ap) imperfect += *c.ap != 1.0 || *c.aph != 1.0;
    }
  }
  o.check(imperfect == 0, "perfect detector scores AP = APH = 1 on 20 fixtures");
  return o;
}

// ---- 10: end to end through the command-line tool -------------------------------------

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::string& cmd) { return std::system(cmd.c_str()); }

Outcome end_to_end(const std::string& tool) {
  Outcome o;
  if (tool.empty() || !fs::exists(tool)) {
    o.check(false, "tool binary not found: '" + tool + "'");
    return o;
  }
  const fs::path dir = fs::temp_directory_path() / "finepillar_acceptance_10";
  fs::remove_all(dir);
  fs::create_directories(dir);

  // Object points do not depend on the ground count, so the total can be set exactly.
  PipelineConfig cfg;
  SynthConfig sc = synth_config_for(cfg, 0);
  sc.ground_points = 0;
  const Index object_points = synth_scene(sc).cloud.count();
  {
    std::ofstream cfg_out(dir / "config.json");
    cfg_out << R"({"synth": {"ground_points": )" << 100000 - object_points << "}}";
  }
  const std::string q = "'";
  const std::string base = q + tool + q + " ";
  o.check(run(base + "synth -c " + q + (dir / "config.json").string() + q + " -n 1 -o " + q +
              (dir / "scenes").string() + q + " > /dev/null 2>&1") == 0,
          "synth exits 0");
  const fs::path scene = dir / "scenes" / "scene_0000.bin";
  const auto points = fs::exists(scene) ? fs::file_size(scene) / 16 : 0;
  o.check(points == 100000, "scene has " + std::to_string(points) + " points");

  double slowest = 0;
  for (const char* run_dir : {"run1", "run2"}) {
    const auto t0 = std::chrono::steady_clock::now();
    const int rc = run(base + "infer --threads 1 " + q + scene.string() + q + " -o " + q +
                       (dir / run_dir).string() + q + " > " + q +
                       (dir / (std::string(run_dir) + ".log")).string() + q + " 2>&1");
    const double secs = seconds_since(t0);
    slowest = std::max(slowest, secs);
    o.check(rc == 0, std::string(run_dir) + " exits 0 in " + fmt("%.2f", secs) + " s");
  }
  o.check(slowest <= 10, "default config, single thread, slowest run " + fmt("%.2f", slowest) +
                             " s <= 10 s");
  const std::string a = read_all(dir / "run1" / "scene_0000.json");
  const std::string b = read_all(dir / "run2" / "scene_0000.json");
  o.check(!a.empty() && a == b, "detection files are byte-identical (" +
                                    std::to_string(a.size()) + " bytes)");
  const std::string log = read_all(dir / "run1.log");
  std::string missing;
  for (const char* stage : {"pillarize", "pfe", "scatter", "backbone", "head", "decode", "total"}) {
    if (log.find(std::string("timing scene_0000 ") + stage + " ") == std::string::npos) {
      missing += std::string(" ") + stage;
    }
  }
  o.check(missing.empty(), "per-stage timings emitted" + (missing.empty() ? "" : ", missing:" + missing));
  fs::remove_all(dir);
  return o;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome(const std::string&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  std::string tool;
  app.add_option("--criterion", only, "Run a single criterion (1-10)");
  app.add_option("--tool", tool, "Path to the finepillar binary");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "geometry oracles", geometry},
      {2, "tensor op oracles", tensor_ops},
      {3, "plain-pillar reduction", plain_pillars},
      {4, "height encoding precision", height_encoding},
      {5, "occupancy falls with finer cells", occupancy},
      {6, "height profile of synthetic scenes", height_profile},
      {7, "DFSA contracts", dfsa},
      {8, "encode/decode round trip", round_trip},
      {9, "metrics oracle", metrics},
      {10, "end-to-end determinism and speed", end_to_end},
  };
  bool all = true;
  bool ran = false;
  for (const Criterion& c : criteria) {
    if (only != 0 && c.id != only) continue;
    ran = true;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run(tool);
    } catch (const std::exception& e) {
      out.check(false, std::string("exception: ") + e.what());
    }
    for (const std::string& n : out.notes) std::cout << "  " << n << "\n";
    std::cout << "criterion " << c.id << ": " << (out.pass ? "PASS" : "FAIL") << "  " << c.name
              << " (" << fmt("%.1f", seconds_since(t0)) << " s)" << std::endl;
    all = all && out.pass;
  }
  if (!ran) {
    std::cerr << "no criterion " << only << "\n";
    return 2;
  }
  return all ? 0 : 1;
}
