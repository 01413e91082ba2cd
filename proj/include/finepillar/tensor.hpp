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

// Dense NCHW tensors and the handful of inference ops the detector needs.
// Everything is templated on the scalar type; the pipeline instantiates
// float.

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "finepillar/error.hpp"

namespace finepillar {

using Index = Eigen::Index;

template <typename Scalar>
using RowMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Row-major (n, c, h, w) tensor, w fastest.
template <typename Scalar>
class Tensor4 {
 public:
  using PlaneMap = Eigen::Map<RowMatrix<Scalar>>;
  using ConstPlaneMap = Eigen::Map<const RowMatrix<Scalar>>;

  Tensor4() = default;
  Tensor4(Index n, Index c, Index h, Index w)
      : n_(n), c_(c), h_(h), w_(w), data_(Vector<Scalar>::Zero(n * c * h * w)) {
    if (n < 0 || c < 0 || h < 0 || w < 0) {
      throw ShapeError("negative tensor dimension");
    }
  }

  static Tensor4 constant(Index n, Index c, Index h, Index w, Scalar value) {
    Tensor4 t(n, c, h, w);
    t.data_.setConstant(value);
    return t;
  }

  Index n() const { return n_; }
  Index c() const { return c_; }
  Index h() const { return h_; }
  Index w() const { return w_; }
  Index size() const { return data_.size(); }

  Scalar& operator()(Index n, Index c, Index y, Index x) {
    return data_[((n * c_ + c) * h_ + y) * w_ + x];
  }
  Scalar operator()(Index n, Index c, Index y, Index x) const {
    return data_[((n * c_ + c) * h_ + y) * w_ + x];
  }

  Vector<Scalar>& data() { return data_; }
  const Vector<Scalar>& data() const { return data_; }

  /// One (h, w) plane.
  PlaneMap channel(Index n, Index c) {
    return PlaneMap(data_.data() + (n * c_ + c) * h_ * w_, h_, w_);
  }
  ConstPlaneMap channel(Index n, Index c) const {
    return ConstPlaneMap(data_.data() + (n * c_ + c) * h_ * w_, h_, w_);
  }

  /// All channels of one batch item as a (c, h*w) matrix.
  PlaneMap batch(Index n) {
    return PlaneMap(data_.data() + n * c_ * h_ * w_, c_, h_ * w_);
  }
  ConstPlaneMap batch(Index n) const {
    return ConstPlaneMap(data_.data() + n * c_ * h_ * w_, c_, h_ * w_);
  }

  bool same_shape(const Tensor4& o) const {
    return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }

  std::string shape_string() const {
    std::ostringstream os;
    os << "(" << n_ << ", " << c_ << ", " << h_ << ", " << w_ << ")";
    return os.str();
  }

 private:
  Index n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  Vector<Scalar> data_;
};

using Tensor4f = Tensor4<float>;

enum class ResizeMode { kNearest, kBilinear };

/// y = x W + b for row-vector samples x (n, c_in), W (c_in, c_out). Each
/// row is computed the same way wherever it sits in x.
template <typename DerivedX, typename DerivedW, typename DerivedB>
RowMatrix<typename DerivedX::Scalar> linear(
    const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedW>& w,
    const Eigen::MatrixBase<DerivedB>& b) {
  if (x.cols() != w.rows() || b.size() != w.cols()) {
    std::ostringstream os;
    os << "linear: x is " << x.rows() << "x" << x.cols() << ", W is "
       << w.rows() << "x" << w.cols() << ", b has " << b.size() << " entries";
    throw ShapeError(os.str());
  }
  RowMatrix<typename DerivedX::Scalar> y(x.rows(), w.cols());
  y.noalias() = x.lazyProduct(w);
  y.rowwise() += b.derived().reshaped().transpose();
  return y;
}

inline Index conv_out_size(Index in, Index kernel, Index stride, Index pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

/// Zero-padded 2D cross-correlation. `weight` is (c_out, c_in, kh, kw).
template <typename Scalar>
Tensor4<Scalar> conv2d(const Tensor4<Scalar>& x, const Tensor4<Scalar>& weight,
                       const Vector<Scalar>& bias, Index stride, Index pad) {
  const Index c_out = weight.n(), c_in = weight.c();
  const Index kh = weight.h(), kw = weight.w();
  if (x.c() != c_in || bias.size() != c_out || stride < 1 || pad < 0 ||
      x.h() + 2 * pad < kh || x.w() + 2 * pad < kw) {
    throw ShapeError("conv2d: input " + x.shape_string() + " vs weight " +
                     weight.shape_string() + ", bias " +
                     std::to_string(bias.size()));
  }
  const Index oh = conv_out_size(x.h(), kh, stride, pad);
  const Index ow = conv_out_size(x.w(), kw, stride, pad);
  Tensor4<Scalar> out(x.n(), c_out, oh, ow);
  const Index k = c_in * kh * kw;
  Eigen::Map<const RowMatrix<Scalar>> wmat(weight.data().data(), c_out, k);

  if (kh == 1 && kw == 1 && stride == 1 && pad == 0) {
    for (Index n = 0; n < x.n(); ++n) {
      auto o = out.batch(n);
      o.noalias() = wmat * x.batch(n);
      o.colwise() += bias;
    }
    return out;
  }

  // im2col over bands of output rows keeps the column buffer bounded.
  constexpr Index kTargetCols = 1024;
  const Index rows_per_tile = std::max<Index>(1, kTargetCols / std::max<Index>(ow, 1));
  RowMatrix<Scalar> col;
  for (Index n = 0; n < x.n(); ++n) {
    auto o = out.batch(n);
    for (Index oy0 = 0; oy0 < oh; oy0 += rows_per_tile) {
      const Index rows = std::min(rows_per_tile, oh - oy0);
      const Index cols = rows * ow;
      col.resize(k, cols);
      for (Index ci = 0; ci < c_in; ++ci) {
        auto plane = x.channel(n, ci);
        for (Index ky = 0; ky < kh; ++ky) {
          for (Index kx = 0; kx < kw; ++kx) {
            Scalar* dst = col.row((ci * kh + ky) * kw + kx).data();
            for (Index r = 0; r < rows; ++r) {
              const Index iy = (oy0 + r) * stride - pad + ky;
              Scalar* d = dst + r * ow;
              if (iy < 0 || iy >= x.h()) {
                std::fill(d, d + ow, Scalar(0));
                continue;
              }
              const Scalar* src = plane.row(iy).data();
              for (Index ox = 0; ox < ow; ++ox) {
                const Index ix = ox * stride - pad + kx;
                d[ox] = (ix >= 0 && ix < x.w()) ? src[ix] : Scalar(0);
              }
            }
          }
        }
      }
      auto block = o.middleCols(oy0 * ow, cols);
      block.noalias() = wmat * col;
      block.colwise() += bias;
    }
  }
  return out;
}

/// Per-location maximum over channels, (n, 1, h, w).
template <typename Scalar>
Tensor4<Scalar> channel_max_pool(const Tensor4<Scalar>& x) {
  if (x.c() < 1) throw ShapeError("channel_max_pool: no channels");
  Tensor4<Scalar> out(x.n(), 1, x.h(), x.w());
  for (Index n = 0; n < x.n(); ++n) {
    out.batch(n) = x.batch(n).colwise().maxCoeff();
  }
  return out;
}

/// Per-location mean over channels, (n, 1, h, w).
template <typename Scalar>
Tensor4<Scalar> channel_avg_pool(const Tensor4<Scalar>& x) {
  if (x.c() < 1) throw ShapeError("channel_avg_pool: no channels");
  Tensor4<Scalar> out(x.n(), 1, x.h(), x.w());
  for (Index n = 0; n < x.n(); ++n) {
    out.batch(n) = x.batch(n).colwise().mean();
  }
  return out;
}

/// Logistic function, saturated to the open interval (0, 1) of the scalar
/// type so the result never reaches 0 or 1 exactly.
template <typename Scalar>
Scalar sigmoid(Scalar v) {
  const Scalar s = Scalar(1) / (Scalar(1) + std::exp(-v));
  return std::clamp(s, std::numeric_limits<Scalar>::min(),
                    std::nextafter(Scalar(1), Scalar(0)));
}

template <typename Scalar>
Tensor4<Scalar> sigmoid(Tensor4<Scalar> x) {
  x.data() = x.data().unaryExpr([](Scalar v) { return sigmoid(v); });
  return x;
}

template <typename Scalar>
Tensor4<Scalar> relu(Tensor4<Scalar> x) {
  x.data() = x.data().cwiseMax(Scalar(0));
  return x;
}

/// x * scale[c] + shift[c]; inference-time normalization folded to affine.
template <typename Scalar>
Tensor4<Scalar> norm_affine(Tensor4<Scalar> x, const Vector<Scalar>& scale,
                            const Vector<Scalar>& shift) {
  if (scale.size() != x.c() || shift.size() != x.c()) {
    throw ShapeError("norm_affine: " + std::to_string(scale.size()) +
                     " scales for " + x.shape_string());
  }
  for (Index n = 0; n < x.n(); ++n) {
    auto b = x.batch(n);
    b.array().colwise() *= scale.array();
    b.colwise() += shift;
  }
  return x;
}

/// Resamples to (out_h, out_w). Nearest takes floor(dst * in / out);
/// bilinear uses half-pixel centers with edge clamping.
template <typename Scalar>
Tensor4<Scalar> resize(const Tensor4<Scalar>& x, Index out_h, Index out_w,
                       ResizeMode mode) {
  if (out_h < 1 || out_w < 1 || x.h() < 1 || x.w() < 1) {
    throw ShapeError("resize: empty spatial extent");
  }
  if (out_h == x.h() && out_w == x.w()) return x;
  Tensor4<Scalar> out(x.n(), x.c(), out_h, out_w);

  if (mode == ResizeMode::kNearest) {
    std::vector<Index> sy(static_cast<std::size_t>(out_h)), sx(static_cast<std::size_t>(out_w));
    for (Index y = 0; y < out_h; ++y) sy[y] = std::min(y * x.h() / out_h, x.h() - 1);
    for (Index v = 0; v < out_w; ++v) sx[v] = std::min(v * x.w() / out_w, x.w() - 1);
    for (Index n = 0; n < x.n(); ++n) {
      for (Index c = 0; c < x.c(); ++c) {
        auto src = x.channel(n, c);
        auto dst = out.channel(n, c);
        for (Index y = 0; y < out_h; ++y)
          for (Index v = 0; v < out_w; ++v) dst(y, v) = src(sy[y], sx[v]);
      }
    }
    return out;
  }

  struct Tap {
    Index i0, i1;
    Scalar frac;
  };
  auto taps = [](Index in, Index outn) {
    std::vector<Tap> t(static_cast<std::size_t>(outn));
    const double scale = static_cast<double>(in) / static_cast<double>(outn);
    for (Index o = 0; o < outn; ++o) {
      double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
      if (src < 0) src = 0;
      Index i0 = std::min(static_cast<Index>(std::floor(src)), in - 1);
      Index i1 = std::min(i0 + 1, in - 1);
      t[static_cast<std::size_t>(o)] = {i0, i1, static_cast<Scalar>(src - static_cast<double>(i0))};
    }
    return t;
  };
  const auto ty = taps(x.h(), out_h);
  const auto tx = taps(x.w(), out_w);
  for (Index n = 0; n < x.n(); ++n) {
    for (Index c = 0; c < x.c(); ++c) {
      auto src = x.channel(n, c);
      auto dst = out.channel(n, c);
      for (Index y = 0; y < out_h; ++y) {
        const Tap& a = ty[static_cast<std::size_t>(y)];
        for (Index v = 0; v < out_w; ++v) {
          const Tap& b = tx[static_cast<std::size_t>(v)];
          const Scalar top = (1 - b.frac) * src(a.i0, b.i0) + b.frac * src(a.i0, b.i1);
          const Scalar bot = (1 - b.frac) * src(a.i1, b.i0) + b.frac * src(a.i1, b.i1);
          dst(y, v) = (1 - a.frac) * top + a.frac * bot;
        }
      }
    }
  }
  return out;
}

template <typename Scalar>
Tensor4<Scalar> upsample(const Tensor4<Scalar>& x, Index factor, ResizeMode mode) {
  if (factor < 1) throw ShapeError("upsample: factor must be >= 1");
  return resize(x, x.h() * factor, x.w() * factor, mode);
}

/// Stacks tensors along channels in argument order.
template <typename Scalar>
Tensor4<Scalar> concat_channels(const std::vector<Tensor4<Scalar>>& xs) {
  if (xs.empty()) throw ShapeError("concat_channels: no inputs");
  Index c = 0;
  for (const auto& t : xs) {
    if (t.n() != xs[0].n() || t.h() != xs[0].h() || t.w() != xs[0].w()) {
      throw ShapeError("concat_channels: " + t.shape_string() + " vs " +
                       xs[0].shape_string());
    }
    c += t.c();
  }
  Tensor4<Scalar> out(xs[0].n(), c, xs[0].h(), xs[0].w());
  for (Index n = 0; n < out.n(); ++n) {
    Index at = 0;
    for (const auto& t : xs) {
      out.batch(n).middleRows(at, t.c()) = t.batch(n);
      at += t.c();
    }
  }
  return out;
}

/// Multiplies every channel of x by the single-channel map `gate`.
template <typename Scalar>
Tensor4<Scalar> gate_channels(Tensor4<Scalar> x, const Tensor4<Scalar>& gate) {
  if (gate.c() != 1 || gate.n() != x.n() || gate.h() != x.h() ||
      gate.w() != x.w()) {
    throw ShapeError("gate_channels: gate " + gate.shape_string() +
                     " for " + x.shape_string());
  }
  for (Index n = 0; n < x.n(); ++n) {
    x.batch(n).array().rowwise() *= gate.batch(n).row(0).array();
  }
  return x;
}

}  // namespace finepillar
