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
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oifuse/climatology.hpp"
#include "oifuse/core_model.hpp"
#include "oifuse/types.hpp"

namespace oifuse {

/// Everything the filter needs for one pixel of one band.
struct PixelInputs {
  std::array<GaussianBelief, 12> clim;
  std::vector<std::optional<GaussianBelief>> fusion;  // one per series entry
  PixelSeries series;
};

struct HeldOutPair {
  std::int64_t pixel_id = 0;
  std::size_t step = 0;
  double prediction = 0.0;
  double truth = 0.0;

  bool operator==(const HeldOutPair&) const = default;
};

/// Leave-one-out over one pixel: each valid observation in turn is marked
/// invalid, the series is filtered, and the posterior mean at that step is
/// paired with the withheld value. Throws InsufficientData for fewer than
/// two valid observations.
std::vector<HeldOutPair> leave_one_out_pixel(const PixelInputs& pixel,
                                             const ObservationModel& obs);

struct LooResult {
  std::vector<HeldOutPair> pairs;  // ordered by pixel id, then step
  std::size_t skipped_pixels = 0;
};

/// Runs leave_one_out_pixel over many pixels; pixels with too few valid
/// observations are skipped and counted.
LooResult leave_one_out(std::span<const PixelInputs> pixels, const ObservationModel& obs,
                        unsigned threads = 1);

struct PixelCorrelation {
  std::int64_t pixel_id = 0;
  double rho = 0.0;
};

/// One row of the report.
struct MetricsEntry {
  std::string site;
  std::string band;
  double me = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  // Mean per-pixel Pearson correlation; 0 when no pixel qualifies
  // (rho_pixels == 0).
  double mean_rho = 0.0;
  std::size_t n_heldout = 0;
  std::size_t rho_pixels = 0;
  std::vector<PixelCorrelation> pixel_rho;
};

/// ME, RMSE, MAE over all pairs plus the mean per-pixel correlation (pixels
/// with < 3 pairs or a constant series excluded). Pairs are reduced in
/// (pixel id, step) order regardless of input order. Throws EmptyInput.
MetricsEntry metrics(std::span<const HeldOutPair> pairs);

/// factor * population variance of (observation - climatology median) over
/// every valid archive record inside the climatology period, floored at
/// R_FLOOR. Throws EmptyArchive when there is no such record.
double estimate_r(const PixelArchive& archive, const Climatology& clim, double factor = 0.25);

/// Named rectangular pixel window [col0, col1) x [row0, row1).
struct SiteWindow {
  std::string label;
  std::size_t col0 = 0;
  std::size_t row0 = 0;
  std::size_t col1 = 0;
  std::size_t row1 = 0;

  std::vector<std::size_t> pixels(std::size_t grid_width) const;
};

/// `site,band,me,rmse,mae,mean_rho,n_heldout`
void write_metrics_csv(std::ostream& out, std::span<const MetricsEntry> report);

/// Text table with one block per band ("Band 3", ...) and one row per site.
std::string render_table(std::span<const MetricsEntry> report);

/// "B3" -> "Band 3"; other names are used verbatim after "Band ".
std::string band_heading(const std::string& band);

}  // namespace oifuse
