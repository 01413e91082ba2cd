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

#include "finepillar/pillarize.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_map>
#include <unordered_set>

namespace finepillar {
namespace {

Index cell_count(const Range& r, double size, const char* axis) {
  const double n = (r.hi - r.lo) / size;
  const double rounded = std::round(n);
  if (std::abs(n - rounded) > 1e-6 || rounded < 1) {
    throw InputError(std::string("grid: ") + axis + " range is not a whole number of cells");
  }
  return static_cast<Index>(rounded);
}

/// Locates a point's cell; false if it falls outside the grid.
struct CellLocator {
  explicit CellLocator(const GridConfig& g)
      : grid(g), nx(g.nx()), ny(g.ny()), dz(g.sub_height()) {}

  bool locate(double x, double y, double z, CellIndex& out) const {
    if (x < grid.x_range.lo || x >= grid.x_range.hi || y < grid.y_range.lo ||
        y >= grid.y_range.hi || z < grid.z_range.lo || z > grid.z_range.hi) {
      return false;
    }
    out.ix = static_cast<int>(std::min<Index>(
        static_cast<Index>((x - grid.x_range.lo) / grid.grid_size), nx - 1));
    out.iy = static_cast<int>(std::min<Index>(
        static_cast<Index>((y - grid.y_range.lo) / grid.grid_size), ny - 1));
    out.h = static_cast<int>(std::min<Index>(
        static_cast<Index>((z - grid.z_range.lo) / dz), grid.n_sub - 1));
    return true;
  }

  std::int64_t key(const CellIndex& c) const {
    return (static_cast<std::int64_t>(c.iy) * nx + c.ix) * grid.n_sub + c.h;
  }

  const GridConfig& grid;
  Index nx, ny;
  double dz;
};

}  // namespace

void GridConfig::validate() const {
  if (!(x_range.lo < x_range.hi && y_range.lo < y_range.hi && z_range.lo < z_range.hi)) {
    throw InputError("grid: every range needs lo < hi");
  }
  if (!(grid_size > 0)) throw InputError("grid: grid_size must be > 0");
  if (n_sub < 1) throw InputError("grid: n_sub must be >= 1");
  if (max_points_per_subpillar < 1 || max_occupied_subpillars < 1) {
    throw InputError("grid: truncation limits must be >= 1");
  }
  cell_count(x_range, grid_size, "x");
  cell_count(y_range, grid_size, "y");
}

Index GridConfig::nx() const { return cell_count(x_range, grid_size, "x"); }
Index GridConfig::ny() const { return cell_count(y_range, grid_size, "y"); }

void HPEConfig::validate() const {
  if (num_frequencies < 1) throw InputError("hpe: num_frequencies must be >= 1");
  if (!(z_scale > 0)) throw InputError("hpe: z_scale must be > 0");
}

SubPillarBatch assign_pillars(const PointCloud& cloud, const GridConfig& grid) {
  grid.validate();
  const CellLocator loc(grid);
  SubPillarBatch batch;
  batch.nx = loc.nx;
  batch.ny = loc.ny;
  batch.n_sub = grid.n_sub;

  // Pass 1 (input order): cell ids, kept counts and coordinate sums.
  constexpr int kDropped = -1;
  std::vector<int> point_cell(static_cast<std::size_t>(cloud.count()), kDropped);
  std::unordered_map<std::int64_t, int> ids;
  std::vector<Index> counts;
  for (Index i = 0; i < cloud.count(); ++i) {
    CellIndex c;
    if (!loc.locate(cloud.points(i, 0), cloud.points(i, 1), cloud.points(i, 2), c)) {
      ++batch.points_out_of_range;
      continue;
    }
    auto it = ids.find(loc.key(c));
    if (it == ids.end()) {
      if (batch.num_cells() >= grid.max_occupied_subpillars) {
        ++batch.points_truncated;
        continue;
      }
      it = ids.emplace(loc.key(c), static_cast<int>(batch.cells.size())).first;
      batch.cells.push_back(c);
      counts.push_back(0);
    }
    const auto id = static_cast<std::size_t>(it->second);
    if (counts[id] >= grid.max_points_per_subpillar) {
      ++batch.points_truncated;
      continue;
    }
    ++counts[id];
    point_cell[static_cast<std::size_t>(i)] = it->second;
    ++batch.points_assigned;
  }

  // Pass 2: lay out rows cell by cell, points in input order within a cell.
  const std::size_t n_cells = batch.cells.size();
  batch.offsets.assign(n_cells + 1, 0);
  for (std::size_t k = 0; k < n_cells; ++k) batch.offsets[k + 1] = batch.offsets[k] + counts[k];
  batch.features.resize(batch.points_assigned, kPointFeatures);
  batch.z_mean.resize(n_cells);
  batch.z_center.resize(n_cells);

  std::vector<Index> fill(batch.offsets.begin(), batch.offsets.end() - 1);
  for (Index i = 0; i < cloud.count(); ++i) {
    const int id = point_cell[static_cast<std::size_t>(i)];
    if (id == kDropped) continue;
    batch.features.row(fill[static_cast<std::size_t>(id)]++).head<4>() = cloud.points.row(i);
  }

  // Means are summed in sorted order so they do not depend on point order.
  std::vector<float> axis;
  for (std::size_t k = 0; k < n_cells; ++k) {
    const CellIndex& c = batch.cells[k];
    auto rows = batch.features.middleRows(batch.offsets[k], counts[k]);
    Eigen::Vector3d mean;
    for (int d = 0; d < 3; ++d) {
      axis.assign(rows.col(d).begin(), rows.col(d).end());
      std::sort(axis.begin(), axis.end());
      double sum = 0;
      for (float v : axis) sum += v;
      mean[d] = sum / static_cast<double>(counts[k]);
    }
    const Eigen::Vector3d center(grid.x_range.lo + (c.ix + 0.5) * grid.grid_size,
                                 grid.y_range.lo + (c.iy + 0.5) * grid.grid_size,
                                 grid.z_range.lo + (c.h + 0.5) * loc.dz);
    batch.z_mean[k] = mean.z();
    batch.z_center[k] = center.z();
    for (Index r = 0; r < rows.rows(); ++r) {
      const Eigen::Vector3d p = rows.row(r).head<3>().transpose().cast<double>();
      rows.row(r).segment<3>(4) = (p - mean).cast<float>().transpose();
      rows.row(r).segment<3>(7) = (p - center).cast<float>().transpose();
    }
  }
  return batch;
}

Index count_occupied(const PointCloud& cloud, const GridConfig& grid) {
  grid.validate();
  const CellLocator loc(grid);
  std::unordered_set<std::int64_t> keys;
  for (Index i = 0; i < cloud.count(); ++i) {
    CellIndex c;
    if (loc.locate(cloud.points(i, 0), cloud.points(i, 1), cloud.points(i, 2), c)) {
      keys.insert(loc.key(c));
    }
  }
  return static_cast<Index>(keys.size());
}

Eigen::VectorXd height_position_encoding(double z_mean, double z_center,
                                         const HPEConfig& cfg) {
  cfg.validate();
  const int L = cfg.num_frequencies;
  Eigen::VectorXd out(4 * L);
  const double zs[2] = {z_mean / cfg.z_scale, z_center / cfg.z_scale};
  for (int part = 0; part < 2; ++part) {
    for (int i = 0; i < L; ++i) {
      const double arg = std::ldexp(std::numbers::pi * zs[part], i);
      out[2 * (part * L + i)] = std::sin(arg);
      out[2 * (part * L + i) + 1] = std::cos(arg);
    }
  }
  return out;
}

std::vector<SparsityRow> sparsity_stats(const PointCloud& cloud,
                                        const GridConfig& base,
                                        std::span<const int> n_sub_values,
                                        std::span<const double> grid_sizes) {
  std::vector<SparsityRow> rows;
  for (double size : grid_sizes) {
    for (int n_sub : n_sub_values) {
      GridConfig g = base;
      g.grid_size = size;
      g.n_sub = n_sub;
      g.validate();
      SparsityRow r;
      r.n_sub = n_sub;
      r.grid_size = size;
      r.total_cells = static_cast<std::int64_t>(g.nx() * g.ny() * n_sub);
      r.occupied_cells = static_cast<std::int64_t>(count_occupied(cloud, g));
      r.occupancy_ratio = static_cast<double>(r.occupied_cells) /
                          static_cast<double>(r.total_cells);
      rows.push_back(r);
    }
  }
  return rows;
}

}  // namespace finepillar
