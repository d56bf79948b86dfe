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

// From-scratch leave-one-out: explicit loops over folds calling only
// filter_step, then plain accumulation of the squared errors.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "oifuse/core_model.hpp"
#include "oifuse/evaluate.hpp"

namespace oifuse::testing {

struct LooTotals {
  double sum_sq = 0.0;
  double sum_err = 0.0;
  double sum_abs = 0.0;
  std::size_t n = 0;
  double rmse() const { return std::sqrt(sum_sq / static_cast<double>(n)); }
};

inline std::vector<HeldOutPair> loo_by_hand(const PixelInputs& px, const ObservationModel& obs) {
  std::vector<HeldOutPair> out;
  const auto& entries = px.series.entries;
  std::size_t valid = 0;
  for (const auto& e : entries) valid += e.obs.valid ? 1 : 0;
  if (valid < 2) return out;
  for (std::size_t held = 0; held < entries.size(); ++held) {
    if (!entries[held].obs.valid) continue;
    // Steps are independent, so only the held-out step needs refiltering,
    // but every step is recomputed to mirror a full rerun.
    double prediction = 0.0;
    for (std::size_t t = 0; t < entries.size(); ++t) {
      const Observation y = t == held ? Observation::missing() : entries[t].obs;
      const auto step = filter_step(px.clim[static_cast<std::size_t>(entries[t].when.month - 1)],
                                    px.fusion[t], y, obs);
      if (t == held) prediction = step.posterior.mean();
    }
    out.push_back({px.series.pixel_id, held, prediction, entries[held].obs.value});
  }
  return out;
}

inline LooTotals loo_totals_by_hand(std::span<const PixelInputs> pixels,
                                    const ObservationModel& obs) {
  LooTotals t;
  for (const auto& px : pixels) {
    for (const auto& p : loo_by_hand(px, obs)) {
      const double e = p.prediction - p.truth;
      t.sum_sq += e * e;
      t.sum_err += e;
      t.sum_abs += std::abs(e);
      ++t.n;
    }
  }
  return t;
}

}  // namespace oifuse::testing
