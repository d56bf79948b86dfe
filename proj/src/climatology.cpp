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

#include "oifuse/climatology.hpp"

#include <algorithm>
#include <cmath>

#include "oifuse/error.hpp"
#include "oifuse/parallel.hpp"
#include "oifuse/stats.hpp"

namespace oifuse {

PixelArchive::PixelArchive(std::string band, std::size_t pixel_count)
    : band_(std::move(band)), pixel_count_(pixel_count) {}

void PixelArchive::add_layer(YearMonth when, std::vector<float> values) {
  if (values.size() != pixel_count_) {
    throw Error(ErrorCode::InvalidArgument,
                "archive layer has " + std::to_string(values.size()) +
                    " pixels, expected " + std::to_string(pixel_count_));
  }
  if (when.month < 1 || when.month > 12) {
    throw Error(ErrorCode::InvalidArgument, "archive layer month out of range");
  }
  for (const auto& l : layers_) {
    if (l.when == when) {
      throw Error(ErrorCode::InvalidArgument,
                  "duplicate archive layer for " + std::to_string(when.year) +
                      "-" + std::to_string(when.month));
    }
  }
  layers_.push_back({when, std::move(values)});
}

Climatology build_climatology(const PixelArchive& archive,
                              const ClimatologyOptions& options) {
  const std::size_t npix = archive.pixel_count();

  std::array<std::vector<const ArchiveLayer*>, 12> by_month;
  for (const auto& layer : archive.layers()) {
    if (layer.when.year < options.first_year ||
        layer.when.year > options.last_year) {
      continue;
    }
    by_month[layer.when.month - 1].push_back(&layer);
  }

  Climatology clim;
  clim.band = archive.band();
  clim.pixel_count = npix;
  clim.first_year = options.first_year;
  clim.last_year = options.last_year;
  clim.small_sample_count = options.small_sample_count;
  clim.small_sample_inflation = options.small_sample_inflation;
  clim.median.assign(12 * npix, 0.0);
  clim.stddev.assign(12 * npix, 0.0);
  clim.sample_count.assign(12 * npix, 0);

  // Statistics are taken over sorted samples so the result does not depend
  // on the order in which years were added.
  parallel_for(npix, options.threads, [&](std::size_t p) {
    std::vector<double> samples;
    for (int m = 1; m <= 12; ++m) {
      samples.clear();
      for (const ArchiveLayer* layer : by_month[m - 1]) {
        const float v = layer->values[p];
        if (!std::isnan(v)) samples.push_back(v);
      }
      const std::size_t idx = Climatology::index(p, m, npix);
      clim.sample_count[idx] = static_cast<std::uint32_t>(samples.size());
      if (samples.empty()) continue;
      std::sort(samples.begin(), samples.end());
      clim.median[idx] = stats::median_sorted(samples);
      clim.stddev[idx] = std::sqrt(stats::population_variance(samples));
    }
  });

  std::vector<double> all;
  for (const auto& month_layers : by_month) {
    for (const ArchiveLayer* layer : month_layers) {
      for (float v : layer->values) {
        if (!std::isnan(v)) all.push_back(v);
      }
    }
  }
  if (all.empty()) {
    throw Error(ErrorCode::EmptyArchive,
                "no valid " + archive.band() + " records in " +
                    std::to_string(options.first_year) + ".." +
                    std::to_string(options.last_year));
  }
  std::sort(all.begin(), all.end());
  clim.fallback = GaussianBelief(stats::median_sorted(all),
                                 stats::population_variance(all));
  return clim;
}

GaussianBelief lookup(const Climatology& clim, std::size_t pixel, int month) {
  if (month < 1 || month > 12) {
    throw Error(ErrorCode::InvalidArgument,
                "month out of range: " + std::to_string(month));
  }
  if (pixel >= clim.pixel_count) {
    throw Error(ErrorCode::InvalidArgument, "pixel out of range: " + std::to_string(pixel));
  }
  const std::size_t idx = Climatology::index(pixel, month, clim.pixel_count);
  const std::uint32_t n = clim.sample_count[idx];
  if (n == 0) return clim.fallback;
  double variance = clim.stddev[idx] * clim.stddev[idx];
  if (n < clim.small_sample_count) variance *= clim.small_sample_inflation;
  return {clim.median[idx], variance};
}

std::array<GaussianBelief, 12> lookup_year(const Climatology& clim,
                                           std::size_t pixel) {
  std::array<GaussianBelief, 12> out;
  for (int m = 1; m <= 12; ++m) out[m - 1] = lookup(clim, pixel, m);
  return out;
}

}  // namespace oifuse
