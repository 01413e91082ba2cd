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

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "finepillar/geom.hpp"
#include "finepillar/tensor.hpp"

namespace finepillar {

inline constexpr int kNumClasses = 3;
inline constexpr int kVehicle = 0;
inline constexpr int kPedestrian = 1;
inline constexpr int kCyclist = 2;

const char* class_name(int class_id);

/// Rows of (x, y, z, intensity); the row-major layout matches the binary
/// point format byte for byte.
using PointMatrix = Eigen::Matrix<float, Eigen::Dynamic, 4, Eigen::RowMajor>;

struct PointCloud {
  PointMatrix points = PointMatrix(0, 4);

  Index count() const { return points.rows(); }
  /// Throws InputError on non-finite coordinates or intensity outside [0, 1].
  void validate() const;
};

struct LabeledBox {
  Box7d box;
  int class_id = kVehicle;
  std::optional<int> num_points_inside;
};

struct Scene {
  PointCloud cloud;
  std::vector<LabeledBox> labels;
  std::string id;
};

/// Parameters of the synthetic scene generator. Objects rest on the mean
/// ground height; the scene spans [-x_extent, x_extent] x [-y_extent, y_extent].
struct SynthConfig {
  double ground_z_mean = 0.0;
  double ground_z_stddev = 0.05;
  int ground_points = 20000;
  std::array<int, kNumClasses> object_counts{8, 6, 4};
  /// (length, width, height) in meters per class.
  std::array<Eigen::Vector3d, kNumClasses> size_priors{
      Eigen::Vector3d(4.5, 2.0, 1.6), Eigen::Vector3d(0.8, 0.8, 1.7),
      Eigen::Vector3d(1.8, 0.8, 1.7)};
  /// Inclusive (min, max) number of points sampled on each object.
  std::array<std::array<int, 2>, kNumClasses> points_per_object{
      {{60, 400}, {15, 80}, {20, 120}}};
  double x_extent = 25.0;
  double y_extent = 25.0;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class PointFormat { kBinaryF32, kCsv };

/// `.csv` selects CSV, anything else the raw binary layout.
PointFormat point_format_for(const std::filesystem::path& path);

PointCloud read_point_cloud(const std::filesystem::path& path, PointFormat format);
void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud,
                       PointFormat format);

inline constexpr int kLabelFormatVersion = 1;

std::vector<LabeledBox> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path,
                  std::span<const LabeledBox> labels);
std::vector<LabeledBox> labels_from_json_text(const std::string& text,
                                              const std::string& source);
std::string labels_to_json_text(std::span<const LabeledBox> labels);

std::vector<Detection> read_detections(const std::filesystem::path& path);
void write_detections(const std::filesystem::path& path,
                      std::span<const Detection> dets);
std::string detections_to_json_text(std::span<const Detection> dets);

/// Deterministic scene: Gaussian ground heights plus non-overlapping objects
/// whose points lie on their visible faces. Labels carry point counts.
Scene synth_scene(const SynthConfig& cfg);

struct HistogramBin {
  double center = 0;
  std::int64_t count = 0;
};

/// Histogram of z over [z_lo, z_hi) with bins of `bin_width`.
std::vector<HistogramBin> height_histogram(const PointCloud& cloud,
                                           double bin_width, double z_lo,
                                           double z_hi);

/// Points inside the rotated footprint with cz - h/2 <= z <= cz + h/2.
Index count_points_in_box(const PointCloud& cloud, const Box7d& box);

/// Fills `num_points_inside` for every label.
void fill_point_counts(const PointCloud& cloud, std::span<LabeledBox> labels);

}  // namespace finepillar
