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

// Pillar feature extraction: two VFE layers per occupied sub-pillar, the
// height encoding appended per cell, and the scatter into a BEV pseudo-image
// whose channel blocks are indexed by sub-pillar slice.

#pragma once

#include <vector>

#include "finepillar/pillarize.hpp"
#include "finepillar/weights.hpp"

namespace finepillar {

struct PFEConfig {
  /// Width after the first layer's max-concat; the per-point linear layer
  /// produces half of it.
  Index vfe1_channels = 32;
  Index vfe2_channels = 64;
  HPEConfig hpe;

  void validate() const;
  /// Per-sub-pillar feature width C_sp.
  Index cell_channels() const { return vfe2_channels + hpe.channels(); }
};

/// pfe.vfe1.* and pfe.vfe2.* linear blocks.
std::vector<ParamSpec> pfe_params(const PFEConfig& cfg);

/// One row of vfe2_channels per cell:
///   h1 = relu(norm(p W1 + b1)) per point
///   h1' = [h1, max_cell(h1)]
///   out = max_cell(relu(norm(h1' W2 + b2)))
RowMatrix<float> vfe_forward(const SubPillarBatch& batch,
                             const WeightStore& weights, const PFEConfig& cfg);

/// Appends the height encoding of (z_mean, z_center) to each cell row.
RowMatrix<float> attach_hpe(const RowMatrix<float>& cell_features,
                            const SubPillarBatch& batch, const HPEConfig& hpe);

/// (1, n_sub * C_sp, ny, nx); slice h of cell (ix, iy) fills channels
/// [h * C_sp, (h + 1) * C_sp) at row iy, column ix. Everything else is zero.
Tensor4f scatter_to_pseudo_image(const SubPillarBatch& batch,
                                 const RowMatrix<float>& cell_features,
                                 const GridConfig& grid);

}  // namespace finepillar
