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

#include "oifuse/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "oifuse/error.hpp"

namespace oifuse {

GaussianBelief::GaussianBelief(double mean, double variance) {
  if (!std::isfinite(mean)) {
    throw Error(ErrorCode::InvalidArgument,
                "belief mean must be finite, got " + std::to_string(mean));
  }
  if (std::isnan(variance) || variance < 0.0 || std::isinf(variance)) {
    throw Error(ErrorCode::InvalidArgument,
                "belief variance must be finite and >= 0, got " +
                    std::to_string(variance));
  }
  mean_ = mean;
  variance_ = std::max(variance, kVarFloor);
}

ObservationModel::ObservationModel(double h, double r) {
  if (!std::isfinite(h) || h == 0.0) {
    throw Error(ErrorCode::InvalidArgument,
                "observation scale h must be finite and non-zero");
  }
  if (!std::isfinite(r) || r < 0.0) {
    throw Error(ErrorCode::InvalidArgument,
                "observation noise r must be finite and >= 0");
  }
  h_ = h;
  r_ = std::max(r, kRFloor);
}

GaussianBelief predict(const GaussianBelief& prior_clim,
                       const GaussianBelief& prior_fusion) {
  const double u1 = prior_clim.mean();
  const double p1 = prior_clim.variance();
  const double u2 = prior_fusion.mean();
  const double p2 = prior_fusion.variance();

  // Written so that swapping the arguments yields bit-identical results.
  const double mean = (u1 * p2 + u2 * p1) / (p1 + p2);
  const double variance = 1.0 / (1.0 / p1 + 1.0 / p2);
  return {mean, variance};
}

double kalman_gain(double predicted_variance, const ObservationModel& obs) {
  const double h = obs.h();
  return h * predicted_variance / (h * h * predicted_variance + obs.r());
}

UpdateResult update(const GaussianBelief& predicted, const Observation& y,
                    const ObservationModel& obs) {
  if (!y.valid) return {predicted, 0.0};

  const double h = obs.h();
  const double p = predicted.variance();
  const double k = kalman_gain(p, obs);
  const double mean = predicted.mean() + k * (y.value - h * predicted.mean());
  // (1 - K H) P rewritten as P R / (H^2 P + R); same value, no cancellation
  // when K H is close to 1.
  const double variance = p * obs.r() / (h * h * p + obs.r());
  return {GaussianBelief(mean, variance), k};
}

FilteredStep filter_step(const GaussianBelief& clim,
                         const std::optional<GaussianBelief>& fusion,
                         const Observation& y, const ObservationModel& obs) {
  FilteredStep step;
  step.prior_clim = clim;
  step.prior_fusion = fusion;
  step.predicted = fusion ? predict(clim, *fusion) : clim;
  const UpdateResult res = update(step.predicted, y, obs);
  step.posterior = res.posterior;
  step.gain = res.gain;
  step.observed = y.valid;
  return step;
}

std::vector<FilteredStep> filter_series(
    std::span<const GaussianBelief, 12> clim_by_month,
    std::span<const std::optional<GaussianBelief>> fusion_by_step,
    const PixelSeries& observations, const ObservationModel& obs) {
  if (fusion_by_step.size() != observations.entries.size()) {
    throw Error(ErrorCode::LengthMismatch,
                "fusion inputs have " + std::to_string(fusion_by_step.size()) +
                    " steps but the series has " +
                    std::to_string(observations.entries.size()));
  }
  std::vector<FilteredStep> out;
  out.reserve(observations.entries.size());
  for (std::size_t k = 0; k < observations.entries.size(); ++k) {
    const SeriesEntry& e = observations.entries[k];
    if (e.when.month < 1 || e.when.month > 12) {
      throw Error(ErrorCode::InvalidArgument,
                  "month out of range: " + std::to_string(e.when.month));
    }
    out.push_back(filter_step(clim_by_month[e.when.month - 1],
                              fusion_by_step[k], e.obs, obs));
  }
  return out;
}

std::size_t count_out_of_range(std::span<const FilteredStep> steps) {
  return static_cast<std::size_t>(
      std::count_if(steps.begin(), steps.end(), [](const FilteredStep& s) {
        const double m = s.posterior.mean();
        return m < 0.0 || m > 1.0;
      }));
}

}  // namespace oifuse
