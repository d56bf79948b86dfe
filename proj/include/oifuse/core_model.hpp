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

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "oifuse/types.hpp"

namespace oifuse {

/// Everything computed for one time step of one pixel.
struct FilteredStep {
  GaussianBelief prior_clim;
  std::optional<GaussianBelief> prior_fusion;  // absent: no coarse observation
  GaussianBelief predicted;
  GaussianBelief posterior;
  double gain = 0.0;  // 0 when no update was applied
  bool observed = false;
};

struct UpdateResult {
  GaussianBelief posterior;
  double gain = 0.0;
};

/// Precision-weighted combination of the climatology prior and the fusion
/// prior:
///   mean     = u1 * P2 / (P1 + P2) + u2 * P1 / (P1 + P2)
///   variance = (1/P1 + 1/P2)^-1
GaussianBelief predict(const GaussianBelief& prior_clim,
                       const GaussianBelief& prior_fusion);

/// K = H P / (H^2 P + R)
double kalman_gain(double predicted_variance, const ObservationModel& obs);

/// Measurement update. An invalid observation returns the prediction
/// unchanged with gain 0.
UpdateResult update(const GaussianBelief& predicted, const Observation& y,
                    const ObservationModel& obs);

/// Prediction from one or two priors followed by the update. With no fusion
/// prior the climatology alone is the prediction.
FilteredStep filter_step(const GaussianBelief& clim,
                         const std::optional<GaussianBelief>& fusion,
                         const Observation& y, const ObservationModel& obs);

/// Runs filter_step over every entry of `observations`. Steps carry no
/// state between them; the calendar month of each entry selects its
/// climatology prior. Throws Error(LengthMismatch) when fusion_by_step and
/// observations differ in length.
std::vector<FilteredStep> filter_series(
    std::span<const GaussianBelief, 12> clim_by_month,
    std::span<const std::optional<GaussianBelief>> fusion_by_step,
    const PixelSeries& observations, const ObservationModel& obs);

/// Number of posterior means outside the physical [0, 1] range. Values are
/// never clamped; callers report this count as a warning.
std::size_t count_out_of_range(std::span<const FilteredStep> steps);

}  // namespace oifuse
