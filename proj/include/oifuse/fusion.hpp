/**
 * Copyright 2026, The oifuse Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "oifuse/climatology.hpp"
#include "oifuse/types.hpp"

namespace oifuse {

struct FusionOptions {
  std::size_t min_pairs = 6;
  // Variance handed out by degenerate models; large enough that the
  // climatology dominates the prediction.
  double degenerate_var = 0.05;
  double min_regressor_var = 1e-12;
  int first_year = 1999;
  int last_year = 2009;
  unsigned threads = 1;
};

/// Training sample: the coarse pixel containing a fine pixel and the fine
/// value, same month.
struct CollocatedPair {
  double coarse_value = 0.0;
  double fine_value = 0.0;
  int month_index = 0;
};

/// fine ~ slope * coarse + intercept, for one pixel and band.
struct LinearFusion {
  double slope = 1.0;
  double intercept = 0.0;
  double residual_variance = 0.0;
  std::size_t n_pairs = 0;
  bool degenerate = true;

  bool operator==(const LinearFusion&) const = default;
};

/// Ordinary least squares of fine on coarse. Fewer than min_pairs samples or
/// a regressor variance below min_regressor_var yield a degenerate model
/// (slope 1, intercept 0, residual variance degenerate_var).
LinearFusion fit_fusion_model(std::span<const CollocatedPair> pairs,
                              const FusionOptions& options = {});

/// Second prior for the filter: (slope * coarse + intercept,
/// max(residual_variance, VAR_FLOOR)). Degenerate models pass the coarse
/// value through with their diffuse variance.
GaussianBelief apply_fusion(const LinearFusion& model, double coarse_value);

/// Per-pixel fusion models of one band.
struct FusionModel {
  std::string band;
  std::vector<LinearFusion> pixels;
  FusionOptions options;

  std::size_t degenerate_count() const;
};

/// Fits one model per pixel from archive months (inside the options' year
/// range) where both the fine layer and the collocated coarse layer are
/// valid. `coarse` must already be collocated onto the fine grid.
FusionModel fit_fusion_grid(const PixelArchive& fine, const PixelArchive& coarse,
                            const FusionOptions& options = {});

}  // namespace oifuse
