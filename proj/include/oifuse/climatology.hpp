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
#include <string>
#include <vector>

#include "oifuse/types.hpp"

namespace oifuse {

/// One monthly composite of the fine-sensor archive. NaN marks pixels with
/// no maximum-quality value that month.
struct ArchiveLayer {
  YearMonth when;
  std::vector<float> values;
};

/// Multi-year monthly archive of one band, at most one layer per month.
class PixelArchive {
 public:
  PixelArchive(std::string band, std::size_t pixel_count);

  /// Throws InvalidArgument on a size mismatch or a duplicate month.
  void add_layer(YearMonth when, std::vector<float> values);

  const std::string& band() const noexcept { return band_; }
  std::size_t pixel_count() const noexcept { return pixel_count_; }
  const std::vector<ArchiveLayer>& layers() const noexcept { return layers_; }

 private:
  std::string band_;
  std::size_t pixel_count_;
  std::vector<ArchiveLayer> layers_;
};

struct ClimatologyOptions {
  int first_year = 1999;
  int last_year = 2009;  // inclusive
  // Cells with fewer samples than this get their variance multiplied by
  // small_sample_inflation at lookup.
  std::uint32_t small_sample_count = 3;
  double small_sample_inflation = 4.0;
  unsigned threads = 1;
};

/// Per-pixel, per-calendar-month median and population standard deviation
/// of one band. Cell (pixel p, month m) lives at index (m - 1) * pixels + p.
/// Absent cells (sample_count 0) hold median and stddev 0.
struct Climatology {
  std::string band;
  std::size_t pixel_count = 0;
  int first_year = 0;
  int last_year = 0;
  std::vector<double> median;
  std::vector<double> stddev;
  std::vector<std::uint32_t> sample_count;
  // Band-wide median and variance, used for cells without samples.
  GaussianBelief fallback;
  std::uint32_t small_sample_count = 3;
  double small_sample_inflation = 4.0;

  static std::size_t index(std::size_t pixel, int month, std::size_t pixels) {
    return static_cast<std::size_t>(month - 1) * pixels + pixel;
  }
  bool absent(std::size_t pixel, int month) const {
    return sample_count[index(pixel, month, pixel_count)] == 0;
  }

  bool operator==(const Climatology&) const = default;
};

/// Throws Error(EmptyArchive) when no valid record falls inside the period.
Climatology build_climatology(const PixelArchive& archive,
                              const ClimatologyOptions& options = {});

/// (median, max(std^2 [* inflation], VAR_FLOOR)), or the fallback for
/// absent cells. month is 1..12.
GaussianBelief lookup(const Climatology& clim, std::size_t pixel, int month);

std::array<GaussianBelief, 12> lookup_year(const Climatology& clim,
                                           std::size_t pixel);

}  // namespace oifuse
