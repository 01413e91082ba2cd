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

#include "finepillar/pfe.hpp"

#include "finepillar/layers.hpp"

namespace finepillar {
namespace {

RowMatrix<float> cell_max(const RowMatrix<float>& per_point,
                          const SubPillarBatch& batch) {
  RowMatrix<float> out(batch.num_cells(), per_point.cols());
  for (Index k = 0; k < batch.num_cells(); ++k) {
    out.row(k) = per_point
                     .middleRows(batch.offsets[static_cast<std::size_t>(k)], batch.count(k))
                     .colwise()
                     .maxCoeff();
  }
  return out;
}

}  // namespace

void PFEConfig::validate() const {
  if (vfe1_channels < 2 || vfe1_channels % 2 != 0) {
    throw InputError("pfe: vfe1_channels must be even and >= 2");
  }
  if (vfe2_channels < 1) throw InputError("pfe: vfe2_channels must be >= 1");
  if (hpe.enabled) hpe.validate();
}

std::vector<ParamSpec> pfe_params(const PFEConfig& cfg) {
  cfg.validate();
  auto out = linear_block_params("pfe.vfe1", kPointFeatures, cfg.vfe1_channels / 2);
  auto second = linear_block_params("pfe.vfe2", cfg.vfe1_channels, cfg.vfe2_channels);
  out.insert(out.end(), second.begin(), second.end());
  return out;
}

RowMatrix<float> vfe_forward(const SubPillarBatch& batch,
                             const WeightStore& weights, const PFEConfig& cfg) {
  cfg.validate();
  const Index half = cfg.vfe1_channels / 2;
  if (batch.num_cells() == 0) return RowMatrix<float>(0, cfg.vfe2_channels);

  const RowMatrix<float> points = batch.features;
  const RowMatrix<float> h1 = linear_block(points, weights, "pfe.vfe1", kPointFeatures, half);
  const RowMatrix<float> m1 = cell_max(h1, batch);

  RowMatrix<float> joined(h1.rows(), cfg.vfe1_channels);
  joined.leftCols(half) = h1;
  for (Index k = 0; k < batch.num_cells(); ++k) {
    joined.block(batch.offsets[static_cast<std::size_t>(k)], half, batch.count(k), half)
        .rowwise() = m1.row(k);
  }
  const RowMatrix<float> h2 =
      linear_block(joined, weights, "pfe.vfe2", cfg.vfe1_channels, cfg.vfe2_channels);
  return cell_max(h2, batch);
}

RowMatrix<float> attach_hpe(const RowMatrix<float>& cell_features,
                            const SubPillarBatch& batch, const HPEConfig& hpe) {
  if (!hpe.enabled) return cell_features;
  if (cell_features.rows() != batch.num_cells()) {
    throw ShapeError("attach_hpe: " + std::to_string(cell_features.rows()) +
                     " feature rows for " + std::to_string(batch.num_cells()) + " cells");
  }
  RowMatrix<float> out(cell_features.rows(), cell_features.cols() + hpe.channels());
  out.leftCols(cell_features.cols()) = cell_features;
  for (Index k = 0; k < batch.num_cells(); ++k) {
    const auto z = static_cast<std::size_t>(k);
    out.row(k).tail(hpe.channels()) =
        height_position_encoding(batch.z_mean[z], batch.z_center[z], hpe)
            .cast<float>()
            .transpose();
  }
  return out;
}

Tensor4f scatter_to_pseudo_image(const SubPillarBatch& batch,
                                 const RowMatrix<float>& cell_features,
                                 const GridConfig& grid) {
  const Index nx = grid.nx(), ny = grid.ny();
  const Index c_sp = cell_features.cols();
  if (cell_features.rows() != batch.num_cells()) {
    throw ShapeError("scatter: " + std::to_string(cell_features.rows()) +
                     " feature rows for " + std::to_string(batch.num_cells()) + " cells");
  }
  Tensor4f image(1, grid.n_sub * c_sp, ny, nx);
  for (Index k = 0; k < batch.num_cells(); ++k) {
    const CellIndex& c = batch.cells[static_cast<std::size_t>(k)];
    if (c.ix < 0 || c.ix >= nx || c.iy < 0 || c.iy >= ny || c.h < 0 || c.h >= grid.n_sub) {
      throw DefectError("scatter: cell (" + std::to_string(c.ix) + ", " +
                        std::to_string(c.iy) + ", " + std::to_string(c.h) +
                        ") outside the grid");
    }
    for (Index ch = 0; ch < c_sp; ++ch) {
      image(0, c.h * c_sp + ch, c.iy, c.ix) = cell_features(k, ch);
    }
  }
  return image;
}

}  // namespace finepillar
