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

// Gravity-aligned 3D boxes and the rotated-footprint geometry built on them:
// corners, BEV and 3D IoU, heading error, rotated NMS.

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "finepillar/error.hpp"

namespace finepillar {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

/// Wraps an angle into [-pi, pi).
template <typename Scalar>
Scalar wrap_angle(Scalar a) {
  constexpr Scalar kPi = std::numbers::pi_v<Scalar>;
  constexpr Scalar kTwoPi = 2 * std::numbers::pi_v<Scalar>;
  Scalar r = a - kTwoPi * std::floor((a + kPi) / kTwoPi);
  if (r >= kPi) r -= kTwoPi;
  if (r < -kPi) r += kTwoPi;
  return r;
}

/// A box with center (cx, cy, cz), extents (length along the heading, width,
/// height) and yaw measured counter-clockwise from +x. Yaw is normalized to
/// [-pi, pi) on construction; non-positive or non-finite fields throw.
template <typename Scalar>
struct Box7 {
  Scalar cx = 0, cy = 0, cz = 0;
  Scalar length = 1, width = 1, height = 1;
  Scalar yaw = 0;

  Box7() = default;
  Box7(Scalar cx_, Scalar cy_, Scalar cz_, Scalar length_, Scalar width_,
       Scalar height_, Scalar yaw_)
      : cx(cx_), cy(cy_), cz(cz_), length(length_), width(width_),
        height(height_), yaw(yaw_) {
    for (Scalar v : {cx, cy, cz, length, width, height, yaw}) {
      if (!std::isfinite(v)) throw InputError("box field is not finite");
    }
    if (!(length > 0 && width > 0 && height > 0)) {
      throw InputError("box extents must be positive");
    }
    yaw = wrap_angle(yaw);
  }

  Vec2<Scalar> center_bev() const { return {cx, cy}; }
  Scalar z_min() const { return cz - height / 2; }
  Scalar z_max() const { return cz + height / 2; }
  Scalar bev_area() const { return length * width; }
  Scalar volume() const { return length * width * height; }
  /// Radius of the circle around the center that contains the footprint.
  Scalar bev_radius() const {
    return std::sqrt(length * length + width * width) / 2;
  }

  auto tie() const {
    return std::tie(cx, cy, cz, length, width, height, yaw);
  }
  friend bool operator==(const Box7& a, const Box7& b) {
    return a.tie() == b.tie();
  }
};

using Box7d = Box7<double>;
using Box7f = Box7<float>;

template <typename Scalar>
struct BasicDetection {
  Box7<Scalar> box;
  int class_id = 0;
  Scalar score = 0;
};

using Detection = BasicDetection<double>;

/// Footprint corners as the columns of a 2x4 matrix, counter-clockwise,
/// starting at the rear-right corner.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 4> bev_corners(const Box7<Scalar>& box) {
  Eigen::Matrix<Scalar, 2, 4> local;
  const Scalar hl = box.length / 2;
  const Scalar hw = box.width / 2;
  local << -hl, hl, hl, -hl,
           -hw, -hw, hw, hw;
  Eigen::Matrix<Scalar, 2, 2> rot;
  const Scalar c = std::cos(box.yaw);
  const Scalar s = std::sin(box.yaw);
  rot << c, -s,
         s, c;
  return (rot * local).colwise() + box.center_bev();
}

namespace detail {

template <typename Scalar>
struct Polygon {
  // Clipping a quadrilateral against four half-planes adds at most one
  // vertex per plane.
  std::array<Vec2<Scalar>, 8> v;
  int n = 0;
  void push(const Vec2<Scalar>& p) { v[static_cast<std::size_t>(n++)] = p; }
};

template <typename Scalar>
Scalar cross2(const Vec2<Scalar>& a, const Vec2<Scalar>& b) {
  return a.x() * b.y() - a.y() * b.x();
}

template <typename Scalar>
Scalar polygon_area(const Polygon<Scalar>& poly) {
  Scalar twice = 0;
  for (int i = 0; i < poly.n; ++i) {
    twice += cross2<Scalar>(poly.v[i], poly.v[(i + 1) % poly.n]);
  }
  return std::abs(twice) / 2;
}

/// Sutherland-Hodgman clipping of a convex quadrilateral by another convex
/// counter-clockwise quadrilateral.
template <typename Scalar>
Polygon<Scalar> clip_quad(const Eigen::Matrix<Scalar, 2, 4>& subject,
                          const Eigen::Matrix<Scalar, 2, 4>& clip) {
  constexpr Scalar kRelTol = Scalar(1e-9);
  Polygon<Scalar> out;
  for (int i = 0; i < 4; ++i) out.push(subject.col(i));

  for (int e = 0; e < 4 && out.n > 0; ++e) {
    const Vec2<Scalar> p0 = clip.col(e);
    const Vec2<Scalar> edge = clip.col((e + 1) % 4) - p0;
    const Scalar len = edge.norm();
    const Scalar tol = kRelTol * len * std::max(len, Scalar(1));

    const Polygon<Scalar> in = out;
    out.n = 0;
    for (int i = 0; i < in.n; ++i) {
      const Vec2<Scalar>& cur = in.v[i];
      const Vec2<Scalar>& prev = in.v[(i + in.n - 1) % in.n];
      const Scalar s_cur = cross2<Scalar>(edge, cur - p0);
      const Scalar s_prev = cross2<Scalar>(edge, prev - p0);
      const bool cur_in = s_cur >= -tol;
      const bool prev_in = s_prev >= -tol;
      if (cur_in != prev_in) {
        Scalar t = s_prev / (s_prev - s_cur);
        t = std::clamp(t, Scalar(0), Scalar(1));
        out.push(prev + t * (cur - prev));
      }
      if (cur_in) out.push(cur);
    }
  }
  return out;
}

/// Orders a pair so that f(a, b) and f(b, a) run the identical computation.
template <typename Scalar>
bool canonical_first(const Box7<Scalar>& a, const Box7<Scalar>& b) {
  return a.tie() <= b.tie();
}

}  // namespace detail

/// Area of the intersection of two footprints, in m^2.
template <typename Scalar>
Scalar bev_intersection_area(const Box7<Scalar>& a, const Box7<Scalar>& b) {
  if (!detail::canonical_first(a, b)) return bev_intersection_area(b, a);
  if ((a.center_bev() - b.center_bev()).norm() >=
      a.bev_radius() + b.bev_radius()) {
    return 0;
  }
  const auto poly = detail::clip_quad<Scalar>(bev_corners(a), bev_corners(b));
  if (poly.n < 3) return 0;
  const Scalar area = detail::polygon_area(poly);
  return area < Scalar(1e-12) ? Scalar(0) : area;
}

template <typename Scalar>
Scalar rotated_bev_iou(const Box7<Scalar>& a, const Box7<Scalar>& b) {
  if (!detail::canonical_first(a, b)) return rotated_bev_iou(b, a);
  const Scalar inter = bev_intersection_area(a, b);
  if (inter <= 0) return 0;
  const Scalar uni = a.bev_area() + b.bev_area() - inter;
  return std::clamp(inter / uni, Scalar(0), Scalar(1));
}

template <typename Scalar>
Scalar iou_3d(const Box7<Scalar>& a, const Box7<Scalar>& b) {
  if (!detail::canonical_first(a, b)) return iou_3d(b, a);
  const Scalar dz = std::min(a.z_max(), b.z_max()) -
                    std::max(a.z_min(), b.z_min());
  if (dz <= 0) return 0;
  const Scalar inter = bev_intersection_area(a, b) * dz;
  if (inter <= 0) return 0;
  const Scalar uni = a.volume() + b.volume() - inter;
  return std::clamp(inter / uni, Scalar(0), Scalar(1));
}

/// Absolute heading difference in [0, pi].
template <typename Scalar>
Scalar heading_error(Scalar yaw_a, Scalar yaw_b) {
  return std::abs(wrap_angle(yaw_a - yaw_b));
}

/// Greedy rotated NMS. Visits detections by descending score (ties by lower
/// index) and drops any whose BEV IoU with an already kept detection exceeds
/// `iou_threshold`. With `per_class` only same-class pairs suppress.
/// Returns kept indices in visiting order.
template <typename Scalar>
std::vector<std::size_t> nms_rotated(
    std::span<const BasicDetection<Scalar>> dets, Scalar iou_threshold,
    bool per_class) {
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) {
                     return dets[l].score > dets[r].score;
                   });

  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    const auto& cand = dets[idx];
    bool suppressed = false;
    for (std::size_t k : kept) {
      const auto& other = dets[k];
      if (per_class && other.class_id != cand.class_id) continue;
      if (rotated_bev_iou(cand.box, other.box) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

template <typename Scalar>
std::vector<std::size_t> nms_rotated(
    const std::vector<BasicDetection<Scalar>>& dets, Scalar iou_threshold,
    bool per_class) {
  return nms_rotated(std::span<const BasicDetection<Scalar>>(dets),
                     iou_threshold, per_class);
}

}  // namespace finepillar
