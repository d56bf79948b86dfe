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
#include <optional>
#include <string>
#include <vector>

#include "oifuse/climatology.hpp"
#include "oifuse/core_model.hpp"
#include "oifuse/evaluate.hpp"
#include "oifuse/fusion.hpp"
#include "oifuse/ingest.hpp"
#include "oifuse/synth.hpp"

// Workspace layout used by the commands:
//
//   <input>/scenes/{fine,coarse}/<band>/<name>.{grid,json,qa}   raw scenes
//   <input>/truth/<band>_truth.csv                               synthetic only
//   <out>/climatology/<band>/...                                 build-climatology
//   <out>/fusion/<band>/...                                      fit-fusion
//   <out>/filter/filtered.csv                                    filter
//   <out>/evaluate/{metrics.csv,table.txt,rho_pixels.csv,skill.csv}

namespace oifuse {

namespace fs = std::filesystem;

struct BandSettings {
  std::string name;
  double h = 1.0;
  std::optional<double> r;  // explicit R; otherwise r_factor * residual variance
  double r_factor = 0.25;
};

struct RunConfig {
  fs::path input_dir;
  fs::path out_dir;
  std::vector<BandSettings> bands;
  int clim_first_year = 1999;
  int clim_last_year = 2009;
  int target_year = 2010;
  QualityPolicy fine_policy{{0}};
  QualityPolicy coarse_policy{{0}};
  std::vector<SiteWindow> sites;
  unsigned threads = 1;
  std::uint32_t small_sample_count = 3;
  double small_sample_inflation = 4.0;
  std::size_t min_pairs = 6;
  double degenerate_var = 0.05;
  SyntheticConfig simulate;

  /// Throws Error(ConfigInvalid) on unknown shapes or bad values.
  static RunConfig from_json_text(const std::string& text);
  static RunConfig from_file(const fs::path& path);
  std::string to_json_text() const;

  ClimatologyOptions climatology_options() const;
  FusionOptions fusion_options() const;
  const BandSettings& band(const std::string& name) const;
};

/// Name of the config file that simulate writes into its output directory
/// and that the other commands pick up when --config is not given.
inline constexpr const char* kWorkspaceConfig = "oifuse.json";

/// Reads every scene of one sensor and band under `dir`, applies the quality
/// policy and plausibility mask, and composites per calendar month.
/// Only months of years in [first_year, last_year] are read. Composites are
/// returned in chronological order.
std::vector<MonthlyComposite> load_monthly_composites(const fs::path& dir,
                                                      const QualityPolicy& policy,
                                                      int first_year, int last_year,
                                                      unsigned threads);

/// Archive of composites whose year lies in [first_year, last_year].
PixelArchive archive_from(const std::vector<MonthlyComposite>& composites,
                          const std::string& band, std::size_t pixels, int first_year,
                          int last_year);

/// Everything needed to filter one band of the target year.
struct BandInputs {
  std::string band;
  GridGeometry geometry;
  ObservationModel obs;
  std::vector<PixelInputs> pixels;  // indexed by pixel id
};

/// Loads climatology and fusion products from `cfg.out_dir` and the
/// target-year scenes from `cfg.input_dir`.
BandInputs assemble_band(const RunConfig& cfg, const BandSettings& band);

/// The per-step RMSE of a few estimators against known truth, used to check
/// the filter on synthetic sites.
struct SkillRow {
  std::string band;
  std::string method;
  double rmse = 0.0;
  std::size_t n = 0;
};
std::vector<SkillRow> skill_against_truth(const BandInputs& inputs,
                                          const std::vector<PixelSeries>& truth);

/// Writes a synthetic site as raw scenes plus truth CSV and a workspace
/// config under `out`.
void write_synthetic_site(const SyntheticSite& site, const RunConfig& cfg, const fs::path& out);

/// Default run configuration for a synthetic site: its bands, periods and
/// five horizontal site windows.
RunConfig config_for_site(const SyntheticConfig& synth);

// Commands. Each returns normally on success and throws oifuse::Error on
// invalid input.
void cmd_simulate(const RunConfig& cfg);
void cmd_build_climatology(const RunConfig& cfg);
void cmd_fit_fusion(const RunConfig& cfg);
void cmd_filter(const RunConfig& cfg);
void cmd_evaluate(const RunConfig& cfg);

/// `pixel_id,band,year,month,estimate,variance,ci_low,ci_high,observed`
struct FilteredRow {
  std::int64_t pixel_id = 0;
  std::string band;
  YearMonth when;
  double estimate = 0.0;
  double variance = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool observed = false;
};
std::vector<FilteredRow> read_filtered_csv(const fs::path& path);

}  // namespace oifuse
