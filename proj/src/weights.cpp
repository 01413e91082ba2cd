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

#include "finepillar/weights.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "finepillar/rng.hpp"

namespace finepillar {
namespace {

constexpr char kMagic[4] = {'P', 'K', 'W', '1'};
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint32_t kMaxNameLength = 4096;

std::string shape_to_string(const std::vector<Index>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Index element_count(const std::vector<Index>& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

class Reader {
 public:
  Reader(std::vector<unsigned char> bytes, std::string path)
      : bytes_(std::move(bytes)), path_(std::move(path)) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string str(std::size_t len, const char* what) {
    need(len, what);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + len));
    pos_ += len;
    return s;
  }

  [[noreturn]] void fail(const std::string& msg) const { fail_at(pos_, msg); }
  [[noreturn]] void fail_at(std::size_t at, const std::string& msg) const {
    throw InputError("corrupt weight file '" + path_ + "' at byte " +
                     std::to_string(at) + ": " + msg);
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      fail("truncated " + std::string(what) + " (need " + std::to_string(n) +
           " bytes, " + std::to_string(remaining()) + " left)");
    }
  }

  std::vector<unsigned char> bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void WeightStore::set(const std::string& name, std::vector<Index> shape,
                      Vector<float> values) {
  if (element_count(shape) != values.size()) {
    throw ShapeError("weight '" + name + "': shape " + shape_to_string(shape) +
                     " does not match " + std::to_string(values.size()) +
                     " values");
  }
  tensors_[name] = WeightTensor{std::move(shape), std::move(values)};
}

const WeightTensor& WeightStore::expect(const std::string& name,
                                        const std::vector<Index>& shape) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw InputError("missing weight '" + name + "'");
  if (it->second.shape != shape) {
    throw InputError("weight '" + name + "' has shape " +
                     shape_to_string(it->second.shape) + ", expected " +
                     shape_to_string(shape));
  }
  return it->second;
}

Tensor4f WeightStore::tensor4(const std::string& name, Index d0, Index d1,
                              Index d2, Index d3) const {
  const auto& t = expect(name, {d0, d1, d2, d3});
  Tensor4f out(d0, d1, d2, d3);
  out.data() = t.values;
  return out;
}

Vector<float> WeightStore::vector(const std::string& name, Index size) const {
  return expect(name, {size}).values;
}

RowMatrix<float> WeightStore::matrix(const std::string& name, Index rows,
                                     Index cols) const {
  const auto& t = expect(name, {rows, cols});
  return Eigen::Map<const RowMatrix<float>>(t.values.data(), rows, cols);
}

WeightStore init_weights(std::span<const ParamSpec> specs, std::uint64_t seed) {
  std::vector<const ParamSpec*> ordered;
  ordered.reserve(specs.size());
  for (const auto& s : specs) ordered.push_back(&s);
  std::sort(ordered.begin(), ordered.end(),
            [](const ParamSpec* a, const ParamSpec* b) { return a->name < b->name; });

  Rng rng(seed);
  WeightStore store;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    const ParamSpec& spec = *ordered[i];
    if (i > 0 && ordered[i - 1]->name == spec.name) {
      throw DefectError("duplicate parameter '" + spec.name + "'");
    }
    Vector<float> values(element_count(spec.shape));
    switch (spec.init) {
      case ParamInit::kOnes:
        values.setOnes();
        break;
      case ParamInit::kZeros:
        values.setZero();
        break;
      case ParamInit::kFanInUniform: {
        if (spec.fan_in < 1) throw DefectError("fan_in < 1 for '" + spec.name + "'");
        const double bound = std::sqrt(6.0 / static_cast<double>(spec.fan_in));
        for (Index k = 0; k < values.size(); ++k) {
          values[k] = static_cast<float>(rng.uniform(-bound, bound));
        }
        break;
      }
    }
    store.set(spec.name, spec.shape, std::move(values));
  }
  return store;
}

void save_weights(const WeightStore& store, const std::filesystem::path& path) {
  std::string out(kMagic, kMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, t] : store.tensors()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (Index d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (Index k = 0; k < t.values.size(); ++k) {
      put_u32(out, std::bit_cast<std::uint32_t>(t.values[k]));
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("cannot open '" + path.string() + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw InputError("write failed for '" + path.string() + "'");
}

WeightStore load_weights(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open weight file '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  Reader r(std::move(bytes), path.string());

  if (r.str(4, "magic") != std::string(kMagic, 4)) {
    r.fail_at(0, "bad magic, expected PKW1");
  }
  const std::uint32_t count = r.u32("entry count");
  WeightStore store;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::size_t entry_at = r.pos();
    const std::uint32_t name_len = r.u32("name length");
    if (name_len == 0 || name_len > kMaxNameLength) {
      r.fail_at(entry_at, "implausible name length " + std::to_string(name_len));
    }
    std::string name = r.str(name_len, "name");
    if (store.contains(name)) r.fail_at(entry_at, "duplicate entry '" + name + "'");
    const std::uint32_t rank = r.u32("rank");
    if (rank > kMaxRank) r.fail_at(entry_at, "rank " + std::to_string(rank) + " too large");
    std::vector<Index> shape;
    std::uint64_t numel = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const std::uint32_t d = r.u32("dimension");
      shape.push_back(static_cast<Index>(d));
      constexpr std::uint64_t kCap = std::uint64_t{1} << 40;
      numel = (d != 0 && numel > kCap / d) ? kCap : numel * d;
    }
    if (numel * 4 > r.remaining()) {
      r.fail("truncated payload of '" + name + "'");
    }
    Vector<float> values(static_cast<Index>(numel));
    for (std::uint64_t k = 0; k < numel; ++k) {
      values[static_cast<Index>(k)] = std::bit_cast<float>(r.u32("payload"));
    }
    store.set(name, std::move(shape), std::move(values));
  }
  if (r.remaining() != 0) {
    r.fail(std::to_string(r.remaining()) + " trailing bytes");
  }
  return store;
}

}  // namespace finepillar
