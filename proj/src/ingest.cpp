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

#include "oifuse/ingest.hpp"

#include <algorithm>
#include <limits>

#include "oifuse/error.hpp"
#include "oifuse/stats.hpp"

namespace oifuse {

namespace {

constexpr float kInvalid = std::numeric_limits<float>::quiet_NaN();

// Index of the half-open cell [edge, edge + size) containing coord, or -1.
long long cell_of(double coord, double origin, double size, std::size_t count) {
  const double c = std::floor((coord - origin) / size);
  if (!(c >= 0.0) || c >= static_cast<double>(count)) return -1;
  return static_cast<long long>(c);
}

}  // namespace

SceneGrid::SceneGrid(GridGeometry g, std::string band_name)
    : geometry(g),
      band(std::move(band_name)),
      values(g.size(), kInvalid),
      qa(g.size(), 0) {}

std::size_t SceneGrid::valid_count() const {
  return static_cast<std::size_t>(std::count_if(
      values.begin(), values.end(), [](float v) { return !std::isnan(v); }));
}

bool QualityPolicy::accepts(std::int32_t code) const {
  return std::find(accepted.begin(), accepted.end(), code) != accepted.end();
}

SceneGrid apply_quality_mask(SceneGrid scene, const QualityPolicy& policy) {
  if (scene.qa.size() != scene.values.size()) {
    throw Error(ErrorCode::GeometryMismatch, "qa plane and value plane differ in size");
  }
  for (std::size_t i = 0; i < scene.values.size(); ++i) {
    if (!policy.accepts(scene.qa[i])) scene.values[i] = kInvalid;
  }
  return scene;
}

SceneGrid mask_implausible(SceneGrid scene) {
  for (float& v : scene.values) {
    if (!(v >= kMinPlausible && v <= kMaxPlausible)) v = kInvalid;
  }
  return scene;
}

SceneGrid monthly_composite(std::span<const SceneGrid> scenes) {
  if (scenes.empty()) {
    throw Error(ErrorCode::EmptyInput, "no scenes to composite");
  }
  const GridGeometry& g = scenes.front().geometry;
  for (const auto& s : scenes) {
    if (!(s.geometry == g) || s.values.size() != g.size()) {
      throw Error(ErrorCode::GeometryMismatch, "scenes in a composite must share one grid");
    }
  }

  SceneGrid out(g, scenes.front().band);
  std::vector<double> samples;
  samples.reserve(scenes.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    samples.clear();
    for (const auto& s : scenes) {
      if (s.valid(i)) samples.push_back(s.values[i]);
    }
    if (samples.empty()) continue;
    std::sort(samples.begin(), samples.end());
    out.values[i] = static_cast<float>(stats::median_sorted(samples));
  }
  return out;
}

std::vector<float> collocate(const SceneGrid& coarse, const GridGeometry& fine) {
  const GridGeometry& c = coarse.geometry;
  std::vector<float> out(fine.size(), kInvalid);
  bool any = false;
  for (std::size_t row = 0; row < fine.height; ++row) {
    const double y = fine.origin_y + (static_cast<double>(row) + 0.5) * fine.pixel_height;
    const long long crow = cell_of(y, c.origin_y, c.pixel_height, c.height);
    for (std::size_t col = 0; col < fine.width; ++col) {
      const double x = fine.origin_x + (static_cast<double>(col) + 0.5) * fine.pixel_width;
      const long long ccol = cell_of(x, c.origin_x, c.pixel_width, c.width);
      if (crow < 0 || ccol < 0) continue;
      any = true;
      out[row * fine.width + col] =
          coarse.values[static_cast<std::size_t>(crow) * c.width + static_cast<std::size_t>(ccol)];
    }
  }
  if (!any) {
    throw Error(ErrorCode::NoOverlap, "coarse grid does not cover any fine pixel");
  }
  return out;
}

std::vector<PixelSeries> extract_series(std::span<const MonthlyComposite> composites,
                                        YearMonth first, YearMonth last,
                                        std::span<const std::size_t> pixels) {
  for (std::size_t i = 1; i < composites.size(); ++i) {
    if (!(composites[i - 1].when < composites[i].when)) {
      throw Error(ErrorCode::UnsortedInput,
                  "composites must be strictly increasing in (year, month)");
    }
  }
  if (last < first) {
    throw Error(ErrorCode::InvalidArgument, "series period ends before it starts");
  }
  for (std::size_t i = 1; i < composites.size(); ++i) {
    if (!(composites[i].grid.geometry == composites[0].grid.geometry)) {
      throw Error(ErrorCode::GeometryMismatch, "composites must share one grid");
    }
  }

  const int months = last.ordinal() - first.ordinal() + 1;
  // slot -> composite, or nullptr for a month with no scene
  std::vector<const MonthlyComposite*> slot(static_cast<std::size_t>(months), nullptr);
  for (const auto& c : composites) {
    const int k = c.when.ordinal() - first.ordinal();
    if (k >= 0 && k < months) slot[static_cast<std::size_t>(k)] = &c;
  }

  std::vector<PixelSeries> out;
  out.reserve(pixels.size());
  for (std::size_t p : pixels) {
    PixelSeries s;
    s.pixel_id = static_cast<std::int64_t>(p);
    s.band = composites.empty() ? std::string() : composites.front().grid.band;
    s.entries.reserve(static_cast<std::size_t>(months));
    for (int k = 0; k < months; ++k) {
      SeriesEntry e;
      e.when = YearMonth::from_ordinal(first.ordinal() + k);
      if (const MonthlyComposite* c = slot[static_cast<std::size_t>(k)]) {
        if (p >= c->grid.values.size()) {
          throw Error(ErrorCode::InvalidArgument, "pixel index outside the grid");
        }
        if (c->grid.valid(p)) e.obs = Observation::of(c->grid.values[p]);
      }
      s.entries.push_back(e);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace oifuse
