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

#include "finepillar/layers.hpp"

namespace finepillar {

std::vector<ParamSpec> conv_block_params(const std::string& prefix,
                                         const ConvBlockSpec& spec) {
  auto out = conv_params(prefix + ".conv", spec.in_channels,
                         spec.out_channels, spec.kernel);
  out.push_back({prefix + ".norm.scale", {spec.out_channels}, 1, ParamInit::kOnes});
  out.push_back({prefix + ".norm.shift", {spec.out_channels}, 1, ParamInit::kZeros});
  return out;
}

Tensor4f conv_block(const Tensor4f& x, const WeightStore& weights,
                    const std::string& prefix, const ConvBlockSpec& spec) {
  Tensor4f y = conv_layer(x, weights, prefix + ".conv", spec.in_channels,
                          spec.out_channels, spec.kernel, spec.stride);
  y = norm_affine(std::move(y),
                  weights.vector(prefix + ".norm.scale", spec.out_channels),
                  weights.vector(prefix + ".norm.shift", spec.out_channels));
  return relu(std::move(y));
}

std::vector<ParamSpec> conv_params(const std::string& prefix, Index in_channels,
                                   Index out_channels, Index kernel) {
  const Index fan_in = in_channels * kernel * kernel;
  return {
      {prefix + ".weight", {out_channels, in_channels, kernel, kernel}, fan_in,
       ParamInit::kFanInUniform},
      {prefix + ".bias", {out_channels}, fan_in, ParamInit::kFanInUniform},
  };
}

Tensor4f conv_layer(const Tensor4f& x, const WeightStore& weights,
                    const std::string& prefix, Index in_channels,
                    Index out_channels, Index kernel, Index stride) {
  const Tensor4f w =
      weights.tensor4(prefix + ".weight", out_channels, in_channels, kernel, kernel);
  const Vector<float> b = weights.vector(prefix + ".bias", out_channels);
  return conv2d(x, w, b, stride, kernel / 2);
}

std::vector<ParamSpec> linear_block_params(const std::string& prefix,
                                           Index in_channels,
                                           Index out_channels) {
  return {
      {prefix + ".weight", {in_channels, out_channels}, in_channels,
       ParamInit::kFanInUniform},
      {prefix + ".bias", {out_channels}, in_channels, ParamInit::kFanInUniform},
      {prefix + ".norm.scale", {out_channels}, 1, ParamInit::kOnes},
      {prefix + ".norm.shift", {out_channels}, 1, ParamInit::kZeros},
  };
}

RowMatrix<float> linear_block(const RowMatrix<float>& x,
                              const WeightStore& weights,
                              const std::string& prefix, Index in_channels,
                              Index out_channels) {
  RowMatrix<float> y =
      linear(x, weights.matrix(prefix + ".weight", in_channels, out_channels),
             weights.vector(prefix + ".bias", out_channels));
  const Vector<float> scale = weights.vector(prefix + ".norm.scale", out_channels);
  const Vector<float> shift = weights.vector(prefix + ".norm.shift", out_channels);
  y.array().rowwise() *= scale.transpose().array();
  y.rowwise() += shift.transpose();
  return y.cwiseMax(0.0f);
}

}  // namespace finepillar
