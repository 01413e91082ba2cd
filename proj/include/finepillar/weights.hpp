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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "finepillar/tensor.hpp"

namespace finepillar {

struct WeightTensor {
  std::vector<Index> shape;
  Vector<float> values;

  friend bool operator==(const WeightTensor& a, const WeightTensor& b) {
    return a.shape == b.shape && a.values.size() == b.values.size() &&
           a.values == b.values;
  }
};

enum class ParamInit {
  kFanInUniform,  // U(-sqrt(6 / fan_in), +sqrt(6 / fan_in))
  kOnes,
  kZeros,
};

/// One named parameter the network will ask for at load time.
struct ParamSpec {
  std::string name;
  std::vector<Index> shape;
  Index fan_in = 1;
  ParamInit init = ParamInit::kFanInUniform;
};

/// Named float tensors keyed by dotted path, e.g. `pfe.vfe1.weight`.
class WeightStore {
 public:
  void set(const std::string& name, std::vector<Index> shape,
           Vector<float> values);

  bool contains(const std::string& name) const {
    return tensors_.count(name) != 0;
  }
  std::size_t size() const { return tensors_.size(); }
  const std::map<std::string, WeightTensor>& tensors() const { return tensors_; }

  /// Throws InputError when the name is missing or the shape differs.
  const WeightTensor& expect(const std::string& name,
                             const std::vector<Index>& shape) const;

  Tensor4f tensor4(const std::string& name, Index d0, Index d1, Index d2,
                   Index d3) const;
  Vector<float> vector(const std::string& name, Index size) const;
  /// (rows, cols) matrix stored row-major.
  RowMatrix<float> matrix(const std::string& name, Index rows, Index cols) const;

  friend bool operator==(const WeightStore& a, const WeightStore& b) {
    return a.tensors_ == b.tensors_;
  }

 private:
  std::map<std::string, WeightTensor> tensors_;
};

/// Draws every parameter from the seeded generator. Specs are visited in
/// lexicographic name order so the result does not depend on how the caller
/// ordered them.
WeightStore init_weights(std::span<const ParamSpec> specs, std::uint64_t seed);

/// PKW1 layout, all integers uint32 little-endian:
///   "PKW1" | count | count x (name_len | name | rank | dims[rank] | f32[prod])
void save_weights(const WeightStore& store, const std::filesystem::path& path);
WeightStore load_weights(const std::filesystem::path& path);

}  // namespace finepillar
