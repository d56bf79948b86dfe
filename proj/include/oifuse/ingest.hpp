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

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "oifuse/types.hpp"

namespace oifuse {

/// Axis-aligned affine georeference. Pixel (col, row) covers
/// [origin_x + col * pixel_width, origin_x + (col + 1) * pixel_width) along x
/// and likewise along y with pixel_height (which may be negative, north-up).
struct GridGeometry {
  std::size_t width = 0;
  std::size_t height = 0;
  double origin_x = 0.0;
  double origin_y = 0.0;
  double pixel_width = 1.0;
  double pixel_height = 1.0;

  std::size_t size() const noexcept { return width * height; }
  bool operator==(const GridGeometry&) const = default;
};

/// One band of one scene (or composite). NaN values are invalid. qa has the
/// same dimensions as values.
struct SceneGrid {
  GridGeometry geometry;
  std::string band;
  std::vector<float> values;
  std::vector<std::int32_t> qa;

  SceneGrid() = default;
  SceneGrid(GridGeometry g, std::string band_name);

  bool valid(std::size_t i) const { return !std::isnan(values[i]); }
  std::size_t valid_count() const;
};

struct QualityPolicy {
  std::vector<std::int32_t> accepted;  // qa codes treated as maximum quality

  bool accepts(std::int32_t code) const;
  bool operator==(const QualityPolicy&) const = default;
};

/// Reflectance outside this range after scaling is physically implausible
/// and gets masked rather than clamped.
inline constexpr float kMinPlausible = -0.2f;
inline constexpr float kMaxPlausible = 1.2f;

/// Marks every pixel whose qa code is outside the policy invalid.
SceneGrid apply_quality_mask(SceneGrid scene, const QualityPolicy& policy);

/// Marks values outside [kMinPlausible, kMaxPlausible] invalid.
SceneGrid mask_implausible(SceneGrid scene);

/// Per-pixel median of the valid values of all scenes (even counts average
/// the central pair). Throws GeometryMismatch if the grids differ and
/// EmptyInput for an empty sequence.
SceneGrid monthly_composite(std::span<const SceneGrid> scenes);

/// Value of the coarse pixel whose half-open footprint contains each fine
/// pixel center, NaN outside coarse coverage. Throws NoOverlap when the
/// footprints are disjoint.
std::vector<float> collocate(const SceneGrid& coarse, const GridGeometry& fine);

struct MonthlyComposite {
  YearMonth when;
  SceneGrid grid;
};

/// One PixelSeries per requested pixel covering [first, last] month by
/// month; months without a composite become invalid observations. Throws
/// UnsortedInput unless composites are strictly increasing in time.
std::vector<PixelSeries> extract_series(std::span<const MonthlyComposite> composites,
                                        YearMonth first, YearMonth last,
                                        std::span<const std::size_t> pixels);

}  // namespace oifuse
