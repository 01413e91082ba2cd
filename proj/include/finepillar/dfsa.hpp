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

// Backbone built from dense-feature / sparse-attention (DFSA) modules.
//
// A module sees a sparse, large-scale input and produces features at
// 1/stride of its size from three kinds of paths:
//   large     one strided conv block over the input
//   attention sigmoid(conv7x7([max_c(x), mean_c(x)])), resized (nearest)
//   branch i  log2(S_i) stride-2 blocks, N_i blocks, bilinear upsampling,
//             then gated by the attention map
// The paths are concatenated and fused by a 1x1 conv block. The backbone
// stacks modules and concatenates their outputs at a common scale.

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "finepillar/layers.hpp"
#include "finepillar/tensor.hpp"
#include "finepillar/weights.hpp"

namespace finepillar {

struct DFSAConfig {
  Index stride = 2;
  std::vector<Index> scales{2, 4};
  std::vector<Index> blocks{3, 5};
  std::vector<Index> branch_channels{64, 64};
  Index large_channels = 64;
  Index fused_channels = 128;

  void validate() const;
  Index max_scale() const;
};

struct SCBConfig {
  std::vector<DFSAConfig> modules{DFSAConfig{}, DFSAConfig{}};
  /// Scale of the concatenated output relative to the input; 0 means the
  /// first module's stride.
  Index target_stride = 0;

  void validate() const;
  Index output_stride() const;
  Index out_channels() const;
};

/// Named rows of the scale/block ablation: s48_n24, s48_n35, s24_n24,
/// s24_n35 (scales {4,8} or {2,4}, blocks {2,4} or {3,5}).
DFSAConfig dfsa_preset(std::string_view name);
std::vector<std::string> dfsa_preset_names();

/// `num_modules` copies of a preset.
SCBConfig scb_preset(std::string_view name, int num_modules = 2);

std::vector<ParamSpec> sparse_attention_params(const std::string& prefix);
std::vector<ParamSpec> dfsa_params(const std::string& prefix,
                                   const DFSAConfig& cfg, Index in_channels);
/// Modules are named scb.module<k>.
std::vector<ParamSpec> scb_params(const SCBConfig& cfg, Index in_channels);

/// (n, 1, h, w) map in (0, 1). Weights: <prefix>.weight (1, 2, 7, 7),
/// <prefix>.bias (1).
Tensor4f sparse_attention(const Tensor4f& x, const WeightStore& weights,
                          const std::string& prefix);

/// Intermediate maps of one module, all at the output scale.
struct DFSATrace {
  Tensor4f large;
  Tensor4f attention;
  std::vector<Tensor4f> branches;  // before gating
  std::vector<Tensor4f> gated;
  Tensor4f output;
};

/// `attention_override`, when given, replaces the computed gate (it must
/// already be at the output scale).
DFSATrace dfsa_forward_trace(const Tensor4f& x, const DFSAConfig& cfg,
                             const WeightStore& weights,
                             const std::string& prefix,
                             const Tensor4f* attention_override = nullptr);

Tensor4f dfsa_forward(const Tensor4f& x, const DFSAConfig& cfg,
                      const WeightStore& weights, const std::string& prefix);

Tensor4f scb_forward(const Tensor4f& pseudo_image, const SCBConfig& cfg,
                     const WeightStore& weights);

/// Theoretical receptive field, in input cells, of the deepest feature path
/// (large path or dense branch; the attention gate is excluded). Uses
/// r += (k - 1) * jump; jump *= stride over each chain.
Index receptive_field(const DFSAConfig& cfg);
Index receptive_field(const SCBConfig& cfg);

}  // namespace finepillar
