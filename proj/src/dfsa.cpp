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

#include "finepillar/dfsa.hpp"

#include <algorithm>
#include <bit>

namespace finepillar {
namespace {

constexpr Index kAttentionKernel = 7;

std::string branch_prefix(const std::string& prefix, std::size_t i) {
  return prefix + ".branch" + std::to_string(i);
}

int log2_exact(Index v) {
  return std::countr_zero(static_cast<std::uint64_t>(v));
}

struct RfState {
  Index r = 1;
  Index jump = 1;
  void apply(Index kernel, Index stride) {
    r += (kernel - 1) * jump;
    jump *= stride;
  }
};

/// Receptive field after one module, starting from `in`.
RfState module_rf(const DFSAConfig& cfg, RfState in) {
  RfState large = in;
  large.apply(3, cfg.stride);
  Index best = large.r;
  for (std::size_t i = 0; i < cfg.scales.size(); ++i) {
    RfState b = in;
    for (int d = 0; d < log2_exact(cfg.scales[i]); ++d) b.apply(3, 2);
    for (Index k = 0; k < cfg.blocks[i]; ++k) b.apply(3, 1);
    best = std::max(best, b.r);
  }
  return {best, in.jump * cfg.stride};
}

}  // namespace

void DFSAConfig::validate() const {
  if (stride != 1 && stride != 2) throw InputError("dfsa: stride must be 1 or 2");
  const std::size_t n = scales.size();
  if (n == 0) throw InputError("dfsa: at least one branch is required");
  if (blocks.size() != n || branch_channels.size() != n) {
    throw InputError("dfsa: scales, blocks and branch_channels differ in length");
  }
  if (large_channels < 1 || fused_channels < 1) {
    throw InputError("dfsa: channel counts must be >= 1");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Index s = scales[i];
    if (s < stride || s % stride != 0 || !std::has_single_bit(static_cast<std::uint64_t>(s))) {
      throw InputError("dfsa: scale " + std::to_string(s) +
                       " must be a power of two, >= stride and divisible by it");
    }
    if (blocks[i] < 1) throw InputError("dfsa: block counts must be >= 1");
    if (branch_channels[i] < 1) throw InputError("dfsa: channel counts must be >= 1");
    for (std::size_t j = 0; j < n; ++j) {
      if (scales[i] < scales[j] && blocks[i] > blocks[j]) {
        throw InputError("dfsa: block counts must not decrease as the scale grows");
      }
    }
  }
}

Index DFSAConfig::max_scale() const {
  return *std::max_element(scales.begin(), scales.end());
}

void SCBConfig::validate() const {
  if (modules.empty()) throw InputError("scb: at least one module is required");
  for (const auto& m : modules) m.validate();
  if (target_stride < 0) throw InputError("scb: target_stride must be >= 0");
}

Index SCBConfig::output_stride() const {
  return target_stride > 0 ? target_stride : modules.front().stride;
}

Index SCBConfig::out_channels() const {
  Index c = 0;
  for (const auto& m : modules) c += m.fused_channels;
  return c;
}

DFSAConfig dfsa_preset(std::string_view name) {
  DFSAConfig cfg;
  if (name == "s48_n24") {
    cfg.scales = {4, 8};
    cfg.blocks = {2, 4};
  } else if (name == "s48_n35") {
    cfg.scales = {4, 8};
    cfg.blocks = {3, 5};
  } else if (name == "s24_n24") {
    cfg.scales = {2, 4};
    cfg.blocks = {2, 4};
  } else if (name == "s24_n35") {
    cfg.scales = {2, 4};
    cfg.blocks = {3, 5};
  } else {
    throw InputError("unknown dfsa preset '" + std::string(name) + "'");
  }
  cfg.branch_channels = {64, 64};
  return cfg;
}

std::vector<std::string> dfsa_preset_names() {
  return {"s48_n24", "s48_n35", "s24_n24", "s24_n35"};
}

SCBConfig scb_preset(std::string_view name, int num_modules) {
  if (num_modules < 1) throw InputError("scb: num_modules must be >= 1");
  SCBConfig cfg;
  cfg.modules.assign(static_cast<std::size_t>(num_modules), dfsa_preset(name));
  return cfg;
}

std::vector<ParamSpec> sparse_attention_params(const std::string& prefix) {
  return conv_params(prefix, 2, 1, kAttentionKernel);
}

std::vector<ParamSpec> dfsa_params(const std::string& prefix,
                                   const DFSAConfig& cfg, Index in_channels) {
  cfg.validate();
  std::vector<ParamSpec> out;
  auto append = [&out](std::vector<ParamSpec> more) {
    out.insert(out.end(), more.begin(), more.end());
  };
  append(conv_block_params(prefix + ".large",
                           {in_channels, cfg.large_channels, cfg.stride, 3}));
  append(sparse_attention_params(prefix + ".attn"));
  Index fuse_in = cfg.large_channels;
  for (std::size_t i = 0; i < cfg.scales.size(); ++i) {
    const std::string bp = branch_prefix(prefix, i);
    const Index width = cfg.branch_channels[i];
    Index c = in_channels;
    for (int d = 0; d < log2_exact(cfg.scales[i]); ++d) {
      append(conv_block_params(bp + ".down" + std::to_string(d), {c, width, 2, 3}));
      c = width;
    }
    for (Index k = 0; k < cfg.blocks[i]; ++k) {
      append(conv_block_params(bp + ".block" + std::to_string(k), {c, width, 1, 3}));
      c = width;
    }
    fuse_in += width;
  }
  append(conv_block_params(prefix + ".fuse", {fuse_in, cfg.fused_channels, 1, 1}));
  return out;
}

std::vector<ParamSpec> scb_params(const SCBConfig& cfg, Index in_channels) {
  cfg.validate();
  std::vector<ParamSpec> out;
  Index c = in_channels;
  for (std::size_t k = 0; k < cfg.modules.size(); ++k) {
    auto more = dfsa_params("scb.module" + std::to_string(k), cfg.modules[k], c);
    out.insert(out.end(), more.begin(), more.end());
    c = cfg.modules[k].fused_channels;
  }
  return out;
}

Tensor4f sparse_attention(const Tensor4f& x, const WeightStore& weights,
                          const std::string& prefix) {
  const Tensor4f pooled = concat_channels<float>({channel_max_pool(x), channel_avg_pool(x)});
  return sigmoid(conv_layer(pooled, weights, prefix, 2, 1, kAttentionKernel, 1));
}

DFSATrace dfsa_forward_trace(const Tensor4f& x, const DFSAConfig& cfg,
                             const WeightStore& weights,
                             const std::string& prefix,
                             const Tensor4f* attention_override) {
  cfg.validate();
  const Index s_max = cfg.max_scale();
  if (x.h() % s_max != 0 || x.w() % s_max != 0) {
    throw InputError("dfsa: input " + x.shape_string() +
                     " is not divisible by the largest scale " + std::to_string(s_max));
  }
  const Index in_c = x.c();
  const Index oh = x.h() / cfg.stride, ow = x.w() / cfg.stride;

  DFSATrace t;
  t.large = conv_block(x, weights, prefix + ".large",
                       {in_c, cfg.large_channels, cfg.stride, 3});
  if (attention_override) {
    t.attention = *attention_override;
  } else {
    t.attention = resize(sparse_attention(x, weights, prefix + ".attn"), oh, ow,
                         ResizeMode::kNearest);
  }

  std::vector<Tensor4f> parts{t.large};
  for (std::size_t i = 0; i < cfg.scales.size(); ++i) {
    const std::string bp = branch_prefix(prefix, i);
    const Index width = cfg.branch_channels[i];
    Tensor4f y = x;
    for (int d = 0; d < log2_exact(cfg.scales[i]); ++d) {
      y = conv_block(y, weights, bp + ".down" + std::to_string(d), {y.c(), width, 2, 3});
    }
    for (Index k = 0; k < cfg.blocks[i]; ++k) {
      y = conv_block(y, weights, bp + ".block" + std::to_string(k), {y.c(), width, 1, 3});
    }
    y = upsample(y, cfg.scales[i] / cfg.stride, ResizeMode::kBilinear);
    t.gated.push_back(gate_channels(y, t.attention));
    t.branches.push_back(std::move(y));
    parts.push_back(t.gated.back());
  }
  const Tensor4f joined = concat_channels(parts);
  t.output = conv_block(joined, weights, prefix + ".fuse",
                        {joined.c(), cfg.fused_channels, 1, 1});
  return t;
}

Tensor4f dfsa_forward(const Tensor4f& x, const DFSAConfig& cfg,
                      const WeightStore& weights, const std::string& prefix) {
  return dfsa_forward_trace(x, cfg, weights, prefix).output;
}

Tensor4f scb_forward(const Tensor4f& pseudo_image, const SCBConfig& cfg,
                     const WeightStore& weights) {
  cfg.validate();
  const Index ts = cfg.output_stride();
  if (pseudo_image.h() % ts != 0 || pseudo_image.w() % ts != 0) {
    throw InputError("scb: input " + pseudo_image.shape_string() +
                     " is not divisible by the output stride");
  }
  const Index th = pseudo_image.h() / ts, tw = pseudo_image.w() / ts;
  std::vector<Tensor4f> outputs;
  const Tensor4f* current = &pseudo_image;
  Tensor4f next;
  for (std::size_t k = 0; k < cfg.modules.size(); ++k) {
    next = dfsa_forward(*current, cfg.modules[k], weights, "scb.module" + std::to_string(k));
    outputs.push_back(resize(next, th, tw, ResizeMode::kBilinear));
    current = &next;
  }
  return concat_channels(outputs);
}

Index receptive_field(const DFSAConfig& cfg) {
  cfg.validate();
  return module_rf(cfg, {}).r;
}

Index receptive_field(const SCBConfig& cfg) {
  cfg.validate();
  RfState state;
  for (const auto& m : cfg.modules) state = module_rf(m, state);
  return state.r;
}

}  // namespace finepillar
