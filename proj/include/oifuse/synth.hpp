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

#include <cstdint>
#include <string>
#include <vector>

#include "oifuse/ingest.hpp"

namespace oifuse {

/// Seasonal signal and fusion map of one synthetic band.
struct SyntheticBand {
  std::string name;
  double baseline = 0.3;
  double amplitude = 0.1;
  double phase = 4.0;  // months
  double fusion_slope = 1.0;
  double fusion_intercept = 0.0;
  // Year-to-year anomaly shared by all fine pixels of one coarse block.
  double interannual_sd = 0.0;
};

struct SyntheticConfig {
  std::uint64_t seed = 42;
  std::size_t width = 100;
  std::size_t height = 100;
  int first_year = 1999;
  int years = 10;  // archive years; the target year follows them
  std::size_t coarse_block = 16;
  double fine_pixel_size = 30.0;
  double fine_noise_sd = 0.02;
  double coarse_noise_sd = 0.03;
  double cloud_gap_fraction = 0.3;
  double coarse_gap_fraction = 0.0;
  double heterogeneity_sd = 0.02;
  // Target-year months (1..12) forced invalid in every fine pixel.
  std::vector<int> forced_gap_months;
  // Optional snow-like spikes: per (coarse block, month) probability and
  // additive magnitude applied to the truth of every band.
  double spike_probability = 0.0;
  double spike_magnitude = 0.3;
  std::vector<SyntheticBand> bands = default_bands();

  int target_year() const { return first_year + years; }
  int months() const { return 12 * (years + 1); }

  /// Red (B3) and near-infrared (B4) defaults.
  static std::vector<SyntheticBand> default_bands();

  /// Throws Error(ConfigInvalid).
  void validate() const;
};

/// Monthly grids of one band over the archive years plus the target year,
/// in chronological order.
struct SyntheticBandData {
  std::string name;
  std::vector<MonthlyComposite> truth;      // fine grid, no gaps
  std::vector<MonthlyComposite> fine_obs;   // fine grid, NaN where gapped
  std::vector<MonthlyComposite> coarse_obs; // coarse grid
};

struct SyntheticSite {
  SyntheticConfig config;
  GridGeometry fine_geometry;
  GridGeometry coarse_geometry;
  std::vector<SyntheticBandData> bands;
  // gap_mask[t * pixels + p] is 1 where the fine observation was withheld.
  std::vector<std::uint8_t> gap_mask;
};

/// Deterministic in the seed: each pixel (and each coarse block) draws from
/// its own substream, so neither generation order nor thread count changes
/// the output.
SyntheticSite generate_site(const SyntheticConfig& config, unsigned threads = 1);

/// truth(p, t) = baseline + amplitude * sin(2 pi (month - phase) / 12) +
/// pixel offset + block anomaly + spike. Exposed for tests.
double seasonal_signal(const SyntheticBand& band, int month);

}  // namespace oifuse
