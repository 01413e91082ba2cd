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

// Weight-backed layers shared by the backbone and the heads.

#pragma once

#include <string>
#include <vector>

#include "finepillar/tensor.hpp"
#include "finepillar/weights.hpp"

namespace finepillar {

/// conv(k x k, stride, pad k/2) -> per-channel affine -> relu.
/// Weight names: <prefix>.conv.weight, <prefix>.conv.bias,
/// <prefix>.norm.scale, <prefix>.norm.shift.
struct ConvBlockSpec {
  Index in_channels = 1;
  Index out_channels = 1;
  Index stride = 1;
  Index kernel = 3;
};

std::vector<ParamSpec> conv_block_params(const std::string& prefix,
                                         const ConvBlockSpec& spec);

Tensor4f conv_block(const Tensor4f& x, const WeightStore& weights,
                    const std::string& prefix, const ConvBlockSpec& spec);

/// Bare convolution with bias: <prefix>.weight, <prefix>.bias.
std::vector<ParamSpec> conv_params(const std::string& prefix, Index in_channels,
                                   Index out_channels, Index kernel);

Tensor4f conv_layer(const Tensor4f& x, const WeightStore& weights,
                    const std::string& prefix, Index in_channels,
                    Index out_channels, Index kernel, Index stride);

/// Point-wise linear + affine norm: <prefix>.weight (c_in, c_out),
/// <prefix>.bias, <prefix>.norm.scale, <prefix>.norm.shift.
std::vector<ParamSpec> linear_block_params(const std::string& prefix,
                                           Index in_channels,
                                           Index out_channels);

/// relu(norm(x W + b)) over the rows of x.
RowMatrix<float> linear_block(const RowMatrix<float>& x,
                              const WeightStore& weights,
                              const std::string& prefix, Index in_channels,
                              Index out_channels);

}  // namespace finepillar
