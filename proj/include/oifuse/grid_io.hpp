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

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oifuse/climatology.hpp"
#include "oifuse/fusion.hpp"
#include "oifuse/ingest.hpp"
#include "oifuse/types.hpp"

// On-disk formats.
//
// Binary grid: `<base>.grid` is a row-major little-endian value plane and
// `<base>.json` its sidecar. float32 planes use NaN for invalid pixels;
// int16 planes hold reflectance * scale_factor with `nodata` for invalid
// pixels. An optional `<base>.qa` plane (little-endian int32) carries the
// per-pixel quality codes of raw scenes.
//
// Sidecar keys: format, version, width, height, origin [x, y],
// pixel_size [w, h], band, kind, dtype, scale_factor, nodata, qa_plane,
// qa_policy (null or list of accepted codes), period (null or {year, month}),
// plus free-form `extra`.

namespace oifuse {

namespace fs = std::filesystem;

struct GridMeta {
  GridGeometry geometry;
  std::string band;
  std::string kind = "grid";
  std::string dtype = "float32";  // or "int16"
  double scale_factor = 1.0;
  std::int32_t nodata = -9999;  // int16 planes only
  bool qa_plane = false;
  std::optional<QualityPolicy> qa_policy;
  std::optional<YearMonth> period;
  std::string extra_json = "{}";  // serialized JSON object

  bool operator==(const GridMeta&) const = default;
};

/// Writes `<base>.grid`, `<base>.json` and, when meta.qa_plane is set,
/// `<base>.qa`. Geometry and band in the sidecar are taken from `grid`.
void write_grid(const fs::path& base, const SceneGrid& grid, GridMeta meta);

struct LoadedGrid {
  SceneGrid grid;
  GridMeta meta;
};

/// Reads a grid written by write_grid (or produced externally in the same
/// format). Integer planes are divided by scale_factor; values outside the
/// plausible reflectance range are masked only when `mask_range` is set.
LoadedGrid read_grid(const fs::path& base, bool mask_range = false);

GridMeta read_grid_meta(const fs::path& sidecar);

/// Every sidecar (`*.json` with format "oifuse-grid") in a directory, sorted
/// by file name.
std::vector<fs::path> list_grids(const fs::path& dir);

/// CSV with header `pixel_id,band,year,month,value,valid`.
void write_series_csv(std::ostream& out, std::span<const PixelSeries> series);
void write_series_csv(const fs::path& path, std::span<const PixelSeries> series);
std::vector<PixelSeries> read_series_csv(std::istream& in);
std::vector<PixelSeries> read_series_csv(const fs::path& path);

/// Climatology persists as median_MM / std_MM grids plus climatology.json
/// holding sample counts, fallback and options. Values are stored as
/// float32.
void write_climatology(const fs::path& dir, const Climatology& clim,
                       const GridGeometry& geometry, const std::string& extra_json = "{}");
struct LoadedClimatology {
  Climatology clim;
  GridGeometry geometry;
  std::string extra_json;
};
LoadedClimatology read_climatology(const fs::path& dir);

/// Fusion models persist as slope / intercept / residual_variance / n_pairs
/// / degenerate grids plus fusion.json with the thresholds used.
void write_fusion_model(const fs::path& dir, const FusionModel& model,
                        const GridGeometry& geometry);
struct LoadedFusion {
  FusionModel model;
  GridGeometry geometry;
};
LoadedFusion read_fusion_model(const fs::path& dir);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view text);

}  // namespace oifuse
