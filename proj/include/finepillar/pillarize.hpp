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

// Sub-pillar voxelization: every pillar of the BEV grid is cut into n_sub
// vertical slices, and each occupied slice keeps its own augmented points.

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

#include "finepillar/scene.hpp"
#include "finepillar/tensor.hpp"

namespace finepillar {

struct Range {
  double lo = 0;
  double hi = 1;
};

struct GridConfig {
  Range x_range{-25.6, 25.6};
  Range y_range{-25.6, 25.6};
  Range z_range{-2.0, 4.0};
  double grid_size = 0.16;
  int n_sub = 6;
  int max_points_per_subpillar = 32;
  int max_occupied_subpillars = 60000;

  /// Throws InputError unless the ranges divide into whole cells (1e-6).
  void validate() const;
  Index nx() const;
  Index ny() const;
  double sub_height() const { return (z_range.hi - z_range.lo) / n_sub; }
};

/// Sinusoidal height encoding settings; `z_scale` divides heights before
/// encoding.
struct HPEConfig {
  int num_frequencies = 4;
  double z_scale = 6.0;
  bool enabled = true;

  void validate() const;
  Index channels() const { return enabled ? 4 * num_frequencies : 0; }
};

struct CellIndex {
  int ix = 0;
  int iy = 0;
  int h = 0;

  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Per-point channels: x, y, z, intensity, then offsets from the cell's point
/// mean (x_c, y_c, z_c) and from the cell's geometric center (x_p, y_p, z_p).
inline constexpr Index kPointFeatures = 10;
using PointFeatures =
    Eigen::Matrix<float, Eigen::Dynamic, kPointFeatures, Eigen::RowMajor>;

struct SubPillarBatch {
  std::vector<CellIndex> cells;  // first-seen order
  std::vector<Index> offsets;    // cells.size() + 1 row offsets into features
  PointFeatures features = PointFeatures(0, kPointFeatures);
  std::vector<double> z_mean;    // mean point height per cell
  std::vector<double> z_center;  // geometric center height per cell

  Index nx = 0, ny = 0, n_sub = 1;
  Index points_assigned = 0;
  Index points_out_of_range = 0;
  Index points_truncated = 0;

  Index num_cells() const { return static_cast<Index>(cells.size()); }
  Index count(Index cell) const {
    return offsets[static_cast<std::size_t>(cell) + 1] - offsets[static_cast<std::size_t>(cell)];
  }
  auto cell_points(Index cell) const {
    return features.middleRows(offsets[static_cast<std::size_t>(cell)], count(cell));
  }
};

/// Assigns points to (ix, iy, h) cells over half-open intervals; z == z_hi
/// lands in the top slice. Points beyond max_points_per_subpillar and cells
/// beyond max_occupied_subpillars are dropped in input order.
SubPillarBatch assign_pillars(const PointCloud& cloud, const GridConfig& grid);

/// Number of distinct occupied cells, ignoring both truncation limits.
Index count_occupied(const PointCloud& cloud, const GridConfig& grid);

/// (sin(2^i pi z), cos(2^i pi z)) for i < L, first for z = z_mean / z_scale,
/// then for z = z_center / z_scale.
Eigen::VectorXd height_position_encoding(double z_mean, double z_center,
                                         const HPEConfig& cfg);

struct SparsityRow {
  int n_sub = 1;
  double grid_size = 0;
  std::int64_t total_cells = 0;
  std::int64_t occupied_cells = 0;
  double occupancy_ratio = 0;
};

/// One row per (grid size, n_sub) pair, grid sizes outermost. Ranges come
/// from `base`.
std::vector<SparsityRow> sparsity_stats(const PointCloud& cloud,
                                        const GridConfig& base,
                                        std::span<const int> n_sub_values,
                                        std::span<const double> grid_sizes);

}  // namespace finepillar
