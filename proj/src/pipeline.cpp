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

#include "oifuse/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "oifuse/error.hpp"
#include "oifuse/grid_io.hpp"
#include "oifuse/parallel.hpp"

namespace oifuse {

using nlohmann::json;

namespace {

constexpr double kCiZ = 1.96;
constexpr std::int32_t kQaClear = 0;
constexpr std::int32_t kQaCloud = 2;
constexpr float kCloudReflectance = 0.65f;

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }
void progress(const std::string& msg) { std::cerr << msg << '\n'; }

[[noreturn]] void config_error(const std::string& msg) {
  throw Error(ErrorCode::ConfigInvalid, msg);
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!j.is_object()) config_error(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; }) == allowed.end()) {
      config_error("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

json synth_to_json(const SyntheticConfig& s) {
  json bands = json::array();
  for (const auto& b : s.bands) {
    bands.push_back({{"name", b.name},
                     {"baseline", b.baseline},
                     {"amplitude", b.amplitude},
                     {"phase", b.phase},
                     {"fusion_slope", b.fusion_slope},
                     {"fusion_intercept", b.fusion_intercept},
                     {"interannual_sd", b.interannual_sd}});
  }
  return {{"seed", s.seed},
          {"width", s.width},
          {"height", s.height},
          {"first_year", s.first_year},
          {"years", s.years},
          {"coarse_block", s.coarse_block},
          {"fine_pixel_size", s.fine_pixel_size},
          {"fine_noise_sd", s.fine_noise_sd},
          {"coarse_noise_sd", s.coarse_noise_sd},
          {"cloud_gap_fraction", s.cloud_gap_fraction},
          {"coarse_gap_fraction", s.coarse_gap_fraction},
          {"heterogeneity_sd", s.heterogeneity_sd},
          {"forced_gap_months", s.forced_gap_months},
          {"spike_probability", s.spike_probability},
          {"spike_magnitude", s.spike_magnitude},
          {"bands", bands}};
}

SyntheticConfig synth_from_json(const json& j) {
  check_keys(j,
             {"seed", "width", "height", "first_year", "years", "coarse_block",
              "fine_pixel_size", "fine_noise_sd", "coarse_noise_sd", "cloud_gap_fraction",
              "coarse_gap_fraction", "heterogeneity_sd", "forced_gap_months",
              "spike_probability", "spike_magnitude", "bands"},
             "simulate");
  SyntheticConfig s;
  read_opt(j, "seed", s.seed);
  read_opt(j, "width", s.width);
  read_opt(j, "height", s.height);
  read_opt(j, "first_year", s.first_year);
  read_opt(j, "years", s.years);
  read_opt(j, "coarse_block", s.coarse_block);
  read_opt(j, "fine_pixel_size", s.fine_pixel_size);
  read_opt(j, "fine_noise_sd", s.fine_noise_sd);
  read_opt(j, "coarse_noise_sd", s.coarse_noise_sd);
  read_opt(j, "cloud_gap_fraction", s.cloud_gap_fraction);
  read_opt(j, "coarse_gap_fraction", s.coarse_gap_fraction);
  read_opt(j, "heterogeneity_sd", s.heterogeneity_sd);
  read_opt(j, "forced_gap_months", s.forced_gap_months);
  read_opt(j, "spike_probability", s.spike_probability);
  read_opt(j, "spike_magnitude", s.spike_magnitude);
  if (j.contains("bands")) {
    s.bands.clear();
    for (const auto& b : j["bands"]) {
      check_keys(b,
                 {"name", "baseline", "amplitude", "phase", "fusion_slope", "fusion_intercept",
                  "interannual_sd"},
                 "simulate.bands[]");
      SyntheticBand band;
      band.name = b.at("name").get<std::string>();
      read_opt(b, "baseline", band.baseline);
      read_opt(b, "amplitude", band.amplitude);
      read_opt(b, "phase", band.phase);
      read_opt(b, "fusion_slope", band.fusion_slope);
      read_opt(b, "fusion_intercept", band.fusion_intercept);
      read_opt(b, "interannual_sd", band.interannual_sd);
      s.bands.push_back(band);
    }
  }
  return s;
}

std::string ym_tag(YearMonth ym) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", ym.year, ym.month);
  return buf;
}

fs::path scenes_dir(const RunConfig& cfg, const char* sensor, const std::string& band) {
  return cfg.input_dir / "scenes" / sensor / band;
}

void require_input_dir(const RunConfig& cfg) {
  if (cfg.input_dir.empty() || !fs::is_directory(cfg.input_dir)) {
    config_error("input directory does not exist: " + cfg.input_dir.string());
  }
}

// Configured bands, or one default-settings band per directory under
// scenes/fine when none are configured.
std::vector<BandSettings> selected_bands(const RunConfig& cfg) {
  if (!cfg.bands.empty()) return cfg.bands;
  std::vector<BandSettings> out;
  const fs::path root = cfg.input_dir / "scenes" / "fine";
  if (fs::is_directory(root)) {
    for (const auto& entry : fs::directory_iterator(root)) {
      if (!entry.is_directory()) continue;
      BandSettings b;
      b.name = entry.path().filename().string();
      out.push_back(b);
    }
  }
  if (out.empty()) {
    throw Error(ErrorCode::EmptyArchive, "no bands configured and no scenes under " +
                                             root.string());
  }
  std::sort(out.begin(), out.end(),
            [](const BandSettings& a, const BandSettings& b) { return a.name < b.name; });
  return out;
}

// Coarse composites resampled onto the fine grid.
std::vector<MonthlyComposite> collocate_all(const std::vector<MonthlyComposite>& coarse,
                                            const GridGeometry& fine, unsigned threads) {
  std::vector<MonthlyComposite> out(coarse.size());
  parallel_for(coarse.size(), threads, [&](std::size_t i) {
    out[i].when = coarse[i].when;
    out[i].grid = SceneGrid(fine, coarse[i].grid.band);
    out[i].grid.values = collocate(coarse[i].grid, fine);
  });
  return out;
}

struct SensorData {
  std::vector<MonthlyComposite> fine;
  std::vector<MonthlyComposite> coarse;  // collocated onto the fine grid
  GridGeometry geometry;
};

SensorData load_sensors(const RunConfig& cfg, const std::string& band, int first_year,
                        int last_year, bool need_coarse) {
  SensorData d;
  d.fine = load_monthly_composites(scenes_dir(cfg, "fine", band), cfg.fine_policy, first_year,
                                   last_year, cfg.threads);
  if (d.fine.empty()) {
    throw Error(ErrorCode::EmptyArchive,
                "no fine-sensor scenes for band " + band + " in " +
                    std::to_string(first_year) + ".." + std::to_string(last_year) + " under " +
                    scenes_dir(cfg, "fine", band).string());
  }
  d.geometry = d.fine.front().grid.geometry;
  if (need_coarse) {
    const auto coarse = load_monthly_composites(scenes_dir(cfg, "coarse", band),
                                                cfg.coarse_policy, first_year, last_year,
                                                cfg.threads);
    d.coarse = collocate_all(coarse, d.geometry, cfg.threads);
  }
  return d;
}

std::string csv_bool(bool b) { return b ? "1" : "0"; }

}  // namespace

// --- RunConfig -------------------------------------------------------------

RunConfig RunConfig::from_json_text(const std::string& text) {
  RunConfig cfg;
  try {
    const json j = json::parse(text);
    check_keys(j,
               {"input_dir", "out_dir", "bands", "climatology_period", "target_year",
                "quality_policy", "sites", "threads", "climatology", "fusion", "simulate"},
               "config");
    if (j.contains("input_dir")) cfg.input_dir = j["input_dir"].get<std::string>();
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("bands")) {
      for (const auto& b : j["bands"]) {
        check_keys(b, {"name", "h", "r", "r_factor"}, "bands[]");
        BandSettings s;
        s.name = b.at("name").get<std::string>();
        read_opt(b, "h", s.h);
        if (b.contains("r") && !b["r"].is_null()) s.r = b["r"].get<double>();
        read_opt(b, "r_factor", s.r_factor);
        cfg.bands.push_back(s);
      }
    }
    if (j.contains("climatology_period")) {
      const auto p = j["climatology_period"].get<std::vector<int>>();
      if (p.size() != 2) config_error("climatology_period must be [first, last]");
      cfg.clim_first_year = p[0];
      cfg.clim_last_year = p[1];
    }
    read_opt(j, "target_year", cfg.target_year);
    if (j.contains("quality_policy")) {
      check_keys(j["quality_policy"], {"fine", "coarse"}, "quality_policy");
      read_opt(j["quality_policy"], "fine", cfg.fine_policy.accepted);
      read_opt(j["quality_policy"], "coarse", cfg.coarse_policy.accepted);
    }
    if (j.contains("sites")) {
      for (const auto& s : j["sites"]) {
        check_keys(s, {"label", "cols", "rows"}, "sites[]");
        SiteWindow w;
        w.label = s.at("label").get<std::string>();
        const auto cols = s.at("cols").get<std::vector<std::size_t>>();
        const auto rows = s.at("rows").get<std::vector<std::size_t>>();
        if (cols.size() != 2 || rows.size() != 2 || cols[0] >= cols[1] || rows[0] >= rows[1]) {
          config_error("site " + w.label + ": cols/rows must be [begin, end) with begin < end");
        }
        w.col0 = cols[0];
        w.col1 = cols[1];
        w.row0 = rows[0];
        w.row1 = rows[1];
        cfg.sites.push_back(w);
      }
    }
    read_opt(j, "threads", cfg.threads);
    if (j.contains("climatology")) {
      check_keys(j["climatology"], {"small_sample_count", "small_sample_inflation"},
                 "climatology");
      read_opt(j["climatology"], "small_sample_count", cfg.small_sample_count);
      read_opt(j["climatology"], "small_sample_inflation", cfg.small_sample_inflation);
    }
    if (j.contains("fusion")) {
      check_keys(j["fusion"], {"min_pairs", "degenerate_var"}, "fusion");
      read_opt(j["fusion"], "min_pairs", cfg.min_pairs);
      read_opt(j["fusion"], "degenerate_var", cfg.degenerate_var);
    }
    if (j.contains("simulate")) cfg.simulate = synth_from_json(j["simulate"]);
  } catch (const json::exception& e) {
    config_error(std::string("config: ") + e.what());
  }

  if (cfg.clim_first_year > cfg.clim_last_year) config_error("climatology_period is reversed");
  for (const auto& b : cfg.bands) {
    if (!std::isfinite(b.h) || b.h == 0.0) config_error("band " + b.name + ": h must be non-zero");
    if (b.r && !(*b.r >= 0.0)) config_error("band " + b.name + ": r must be >= 0");
    if (!(b.r_factor >= 0.0)) config_error("band " + b.name + ": r_factor must be >= 0");
  }
  if (!(cfg.degenerate_var > 0.0)) config_error("fusion.degenerate_var must be > 0");
  if (!(cfg.small_sample_inflation >= 1.0)) {
    config_error("climatology.small_sample_inflation must be >= 1");
  }
  return cfg;
}

RunConfig RunConfig::from_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) config_error("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = from_json_text(ss.str());
  const fs::path base = path.parent_path();
  if (!cfg.input_dir.empty() && cfg.input_dir.is_relative()) cfg.input_dir = base / cfg.input_dir;
  if (!cfg.out_dir.empty() && cfg.out_dir.is_relative()) cfg.out_dir = base / cfg.out_dir;
  return cfg;
}

std::string RunConfig::to_json_text() const {
  json j;
  j["input_dir"] = input_dir.string();
  j["out_dir"] = out_dir.string();
  json bands_j = json::array();
  for (const auto& b : bands) {
    bands_j.push_back({{"name", b.name},
                       {"h", b.h},
                       {"r", b.r ? json(*b.r) : json(nullptr)},
                       {"r_factor", b.r_factor}});
  }
  j["bands"] = bands_j;
  j["climatology_period"] = {clim_first_year, clim_last_year};
  j["target_year"] = target_year;
  j["quality_policy"] = {{"fine", fine_policy.accepted}, {"coarse", coarse_policy.accepted}};
  json sites_j = json::array();
  for (const auto& s : sites) {
    sites_j.push_back({{"label", s.label}, {"cols", {s.col0, s.col1}}, {"rows", {s.row0, s.row1}}});
  }
  j["sites"] = sites_j;
  j["threads"] = threads;
  j["climatology"] = {{"small_sample_count", small_sample_count},
                      {"small_sample_inflation", small_sample_inflation}};
  j["fusion"] = {{"min_pairs", min_pairs}, {"degenerate_var", degenerate_var}};
  j["simulate"] = synth_to_json(simulate);
  return j.dump(2) + "\n";
}

ClimatologyOptions RunConfig::climatology_options() const {
  ClimatologyOptions o;
  o.first_year = clim_first_year;
  o.last_year = clim_last_year;
  o.small_sample_count = small_sample_count;
  o.small_sample_inflation = small_sample_inflation;
  o.threads = threads;
  return o;
}

FusionOptions RunConfig::fusion_options() const {
  FusionOptions o;
  o.min_pairs = min_pairs;
  o.degenerate_var = degenerate_var;
  o.first_year = clim_first_year;
  o.last_year = clim_last_year;
  o.threads = threads;
  return o;
}

const BandSettings& RunConfig::band(const std::string& name) const {
  for (const auto& b : bands) {
    if (b.name == name) return b;
  }
  config_error("unknown band " + name);
}

// --- ingestion helpers -----------------------------------------------------

std::vector<MonthlyComposite> load_monthly_composites(const fs::path& dir,
                                                      const QualityPolicy& policy,
                                                      int first_year, int last_year,
                                                      unsigned threads) {
  std::map<YearMonth, std::vector<fs::path>> by_month;
  for (const fs::path& base : list_grids(dir)) {
    const GridMeta meta = read_grid_meta(fs::path(base.string() + ".json"));
    if (!meta.period) {
      throw Error(ErrorCode::Format, base.string() + ": scene sidecar has no period");
    }
    if (meta.period->year < first_year || meta.period->year > last_year) continue;
    by_month[*meta.period].push_back(base);
  }

  std::vector<std::pair<YearMonth, std::vector<fs::path>>> groups(by_month.begin(),
                                                                   by_month.end());
  std::vector<MonthlyComposite> out(groups.size());
  parallel_for(groups.size(), threads, [&](std::size_t i) {
    std::vector<SceneGrid> scenes;
    for (const fs::path& base : groups[i].second) {
      LoadedGrid g = read_grid(base, /*mask_range=*/true);
      if (g.meta.qa_plane) g.grid = apply_quality_mask(std::move(g.grid), policy);
      scenes.push_back(std::move(g.grid));
    }
    out[i] = {groups[i].first, monthly_composite(scenes)};
  });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (!(out[i].grid.geometry == out[0].grid.geometry)) {
      throw Error(ErrorCode::GeometryMismatch, dir.string() + ": scenes use different grids");
    }
  }
  return out;
}

PixelArchive archive_from(const std::vector<MonthlyComposite>& composites,
                          const std::string& band, std::size_t pixels, int first_year,
                          int last_year) {
  PixelArchive archive(band, pixels);
  for (const auto& c : composites) {
    if (c.when.year < first_year || c.when.year > last_year) continue;
    archive.add_layer(c.when, c.grid.values);
  }
  return archive;
}

BandInputs assemble_band(const RunConfig& cfg, const BandSettings& band) {
  const LoadedClimatology clim = read_climatology(cfg.out_dir / "climatology" / band.name);
  const LoadedFusion fusion = read_fusion_model(cfg.out_dir / "fusion" / band.name);
  if (!(clim.geometry == fusion.geometry)) {
    throw Error(ErrorCode::GeometryMismatch,
                "climatology and fusion model of band " + band.name + " use different grids");
  }

  double r = 0.0;
  if (band.r) {
    r = *band.r;
  } else {
    const json extra = json::parse(clim.extra_json);
    if (!extra.contains("residual_variance")) {
      config_error("band " + band.name + ": no r configured and none estimated");
    }
    r = band.r_factor * extra["residual_variance"].get<double>();
  }

  const SensorData data =
      load_sensors(cfg, band.name, cfg.target_year, cfg.target_year, /*need_coarse=*/true);
  if (!(data.geometry == clim.geometry)) {
    throw Error(ErrorCode::GeometryMismatch,
                "target-year scenes of band " + band.name + " do not match the climatology grid");
  }

  BandInputs in;
  in.band = band.name;
  in.geometry = data.geometry;
  in.obs = ObservationModel(band.h, r);
  const std::size_t npix = data.geometry.size();
  std::vector<std::size_t> all(npix);
  for (std::size_t p = 0; p < npix; ++p) all[p] = p;
  const YearMonth first{cfg.target_year, 1};
  const YearMonth last{cfg.target_year, 12};
  auto series = extract_series(data.fine, first, last, all);

  std::vector<const MonthlyComposite*> coarse_slot(12, nullptr);
  for (const auto& c : data.coarse) coarse_slot[static_cast<std::size_t>(c.when.month - 1)] = &c;

  in.pixels.resize(npix);
  parallel_for(npix, cfg.threads, [&](std::size_t p) {
    PixelInputs& px = in.pixels[p];
    px.clim = lookup_year(clim.clim, p);
    px.series = std::move(series[p]);
    px.series.band = band.name;
    px.fusion.resize(px.series.entries.size());
    for (std::size_t k = 0; k < px.series.entries.size(); ++k) {
      const MonthlyComposite* c = coarse_slot[k];
      if (c == nullptr || !c->grid.valid(p)) continue;
      px.fusion[k] = apply_fusion(fusion.model.pixels[p], c->grid.values[p]);
    }
  });
  return in;
}

std::vector<SkillRow> skill_against_truth(const BandInputs& inputs,
                                          const std::vector<PixelSeries>& truth) {
  std::map<std::int64_t, const PixelSeries*> by_pixel;
  for (const auto& s : truth) {
    if (s.band == inputs.band) by_pixel[s.pixel_id] = &s;
  }
  struct Acc {
    double ss = 0.0;
    std::size_t n = 0;
    void add(double e) {
      ss += e * e;
      ++n;
    }
  };
  std::map<std::string, Acc> acc;
  const char* order[] = {"filtered",          "climatology",      "fusion",
                         "filtered_observed", "raw_observed",     "filtered_gap",
                         "climatology_gap",   "fusion_gap"};
  for (const auto& px : inputs.pixels) {
    auto it = by_pixel.find(px.series.pixel_id);
    if (it == by_pixel.end()) continue;
    const auto steps = filter_series(px.clim, px.fusion, px.series, inputs.obs);
    for (std::size_t k = 0; k < steps.size(); ++k) {
      const SeriesEntry* t = nullptr;
      for (const auto& e : it->second->entries) {
        if (e.when == px.series.entries[k].when) t = &e;
      }
      if (t == nullptr || !t->obs.valid) continue;
      const double truth_v = t->obs.value;
      const FilteredStep& s = steps[k];
      const double fusion_mean = s.prior_fusion ? s.prior_fusion->mean() : s.prior_clim.mean();
      acc["filtered"].add(s.posterior.mean() - truth_v);
      acc["climatology"].add(s.prior_clim.mean() - truth_v);
      acc["fusion"].add(fusion_mean - truth_v);
      if (s.observed) {
        acc["filtered_observed"].add(s.posterior.mean() - truth_v);
        acc["raw_observed"].add(px.series.entries[k].obs.value - truth_v);
      } else {
        acc["filtered_gap"].add(s.posterior.mean() - truth_v);
        acc["climatology_gap"].add(s.prior_clim.mean() - truth_v);
        acc["fusion_gap"].add(fusion_mean - truth_v);
      }
    }
  }
  std::vector<SkillRow> rows;
  for (const char* name : order) {
    const Acc& a = acc[name];
    rows.push_back({inputs.band, name, a.n ? std::sqrt(a.ss / static_cast<double>(a.n)) : 0.0, a.n});
  }
  return rows;
}

// --- synthetic sites -------------------------------------------------------

RunConfig config_for_site(const SyntheticConfig& synth) {
  RunConfig cfg;
  cfg.simulate = synth;
  for (const auto& b : synth.bands) cfg.bands.push_back({b.name, 1.0, std::nullopt, 0.25});
  cfg.clim_first_year = synth.first_year;
  cfg.clim_last_year = synth.first_year + synth.years - 1;
  cfg.target_year = synth.target_year();
  const std::size_t strips = std::min<std::size_t>(5, synth.height);
  for (std::size_t i = 0; i < strips; ++i) {
    SiteWindow w;
    w.label = std::to_string(i + 1);
    w.col0 = 0;
    w.col1 = synth.width;
    w.row0 = i * synth.height / strips;
    w.row1 = (i + 1) * synth.height / strips;
    cfg.sites.push_back(w);
  }
  return cfg;
}

void write_synthetic_site(const SyntheticSite& site, const RunConfig& cfg, const fs::path& out) {
  const std::size_t npix = site.fine_geometry.size();
  for (const auto& band : site.bands) {
    const fs::path fine_dir = out / "scenes" / "fine" / band.name;
    const fs::path coarse_dir = out / "scenes" / "coarse" / band.name;
    fs::create_directories(fine_dir);
    fs::create_directories(coarse_dir);
    for (std::size_t t = 0; t < band.fine_obs.size(); ++t) {
      const YearMonth when = band.fine_obs[t].when;
      // Gapped pixels carry a bright cloud value and a cloud qa code; the
      // quality mask is what removes them again.
      SceneGrid fine = band.fine_obs[t].grid;
      for (std::size_t p = 0; p < npix; ++p) {
        if (site.gap_mask[t * npix + p]) {
          fine.values[p] = kCloudReflectance;
          fine.qa[p] = kQaCloud;
        } else {
          fine.qa[p] = kQaClear;
        }
      }
      GridMeta meta;
      meta.kind = "scene";
      meta.qa_plane = true;
      meta.period = when;
      write_grid(fine_dir / (ym_tag(when) + "_01"), fine, meta);

      SceneGrid coarse = band.coarse_obs[t].grid;
      for (std::size_t p = 0; p < coarse.values.size(); ++p) {
        coarse.qa[p] = coarse.valid(p) ? kQaClear : kQaCloud;
      }
      write_grid(coarse_dir / (ym_tag(when) + "_01"), coarse, meta);
    }

    // Target-year truth and fine observations as series CSV.
    const int target = site.config.target_year();
    std::vector<MonthlyComposite> truth_target;
    std::vector<MonthlyComposite> obs_target;
    for (std::size_t t = 0; t < band.truth.size(); ++t) {
      if (band.truth[t].when.year != target) continue;
      truth_target.push_back(band.truth[t]);
      obs_target.push_back(band.fine_obs[t]);
    }
    std::vector<std::size_t> all(npix);
    for (std::size_t p = 0; p < npix; ++p) all[p] = p;
    const auto truth_series = extract_series(truth_target, {target, 1}, {target, 12}, all);
    const auto obs_series = extract_series(obs_target, {target, 1}, {target, 12}, all);
    write_series_csv(out / "truth" / (band.name + "_truth.csv"), truth_series);
    write_series_csv(out / "series" / (band.name + "_fine.csv"), obs_series);
  }

  RunConfig ws = cfg;
  ws.input_dir = ".";
  ws.out_dir = ".";
  std::ofstream cfg_out(out / kWorkspaceConfig, std::ios::binary | std::ios::trunc);
  cfg_out << ws.to_json_text();
  if (!cfg_out) throw Error(ErrorCode::Io, "cannot write workspace config");
}

// --- commands --------------------------------------------------------------

void cmd_simulate(const RunConfig& cfg) {
  if (cfg.out_dir.empty()) config_error("simulate needs an output directory");
  const SyntheticSite site = generate_site(cfg.simulate, cfg.threads);
  RunConfig ws = config_for_site(cfg.simulate);
  if (!cfg.bands.empty()) ws.bands = cfg.bands;
  if (!cfg.sites.empty()) ws.sites = cfg.sites;
  ws.fine_policy = cfg.fine_policy;
  ws.coarse_policy = cfg.coarse_policy;
  ws.small_sample_count = cfg.small_sample_count;
  ws.small_sample_inflation = cfg.small_sample_inflation;
  ws.min_pairs = cfg.min_pairs;
  ws.degenerate_var = cfg.degenerate_var;
  fs::create_directories(cfg.out_dir);
  write_synthetic_site(site, ws, cfg.out_dir);
  progress("simulate: wrote " + std::to_string(site.bands.size()) + " bands, " +
           std::to_string(cfg.simulate.months()) + " months to " + cfg.out_dir.string());
}

void cmd_build_climatology(const RunConfig& cfg) {
  require_input_dir(cfg);
  for (const BandSettings& band : selected_bands(cfg)) {
    const SensorData data = load_sensors(cfg, band.name, cfg.clim_first_year,
                                         cfg.clim_last_year, /*need_coarse=*/false);
    const PixelArchive archive = archive_from(data.fine, band.name, data.geometry.size(),
                                              cfg.clim_first_year, cfg.clim_last_year);
    const Climatology clim = build_climatology(archive, cfg.climatology_options());
    const double resid_var = estimate_r(archive, clim, 1.0);
    const json extra = {{"residual_variance", resid_var},
                        {"r_factor", band.r_factor},
                        {"r_estimate", std::max(band.r_factor * resid_var, kRFloor)}};
    write_climatology(cfg.out_dir / "climatology" / band.name, clim, data.geometry,
                      extra.dump());
    std::size_t absent = 0;
    for (auto c : clim.sample_count) absent += c == 0;
    if (absent) warn("band " + band.name + ": " + std::to_string(absent) +
                     " climatology cells have no samples and use the fallback prior");
    progress("build-climatology: band " + band.name + " from " +
             std::to_string(archive.layers().size()) + " monthly composites");
  }
}

void cmd_fit_fusion(const RunConfig& cfg) {
  require_input_dir(cfg);
  for (const BandSettings& band : selected_bands(cfg)) {
    const SensorData data = load_sensors(cfg, band.name, cfg.clim_first_year,
                                         cfg.clim_last_year, /*need_coarse=*/true);
    const std::size_t npix = data.geometry.size();
    const PixelArchive fine = archive_from(data.fine, band.name, npix, cfg.clim_first_year,
                                           cfg.clim_last_year);
    const PixelArchive coarse = archive_from(data.coarse, band.name, npix,
                                             cfg.clim_first_year, cfg.clim_last_year);
    const FusionModel model = fit_fusion_grid(fine, coarse, cfg.fusion_options());
    write_fusion_model(cfg.out_dir / "fusion" / band.name, model, data.geometry);
    const std::size_t degenerate = model.degenerate_count();
    if (degenerate == npix) {
      warn("band " + band.name + ": all " + std::to_string(npix) +
           " pixels have degenerate fusion models");
    } else if (degenerate) {
      warn("band " + band.name + ": " + std::to_string(degenerate) +
           " pixels have degenerate fusion models");
    }
    progress("fit-fusion: band " + band.name + " fitted " + std::to_string(npix) + " pixels");
  }
}

void cmd_filter(const RunConfig& cfg) {
  require_input_dir(cfg);
  const fs::path path = cfg.out_dir / "filter" / "filtered.csv";
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "pixel_id,band,year,month,estimate,variance,ci_low,ci_high,observed\n";

  for (const BandSettings& band : selected_bands(cfg)) {
    const BandInputs in = assemble_band(cfg, band);
    std::vector<std::string> chunks(in.pixels.size());
    std::vector<std::size_t> out_of_range(in.pixels.size(), 0);
    parallel_for(in.pixels.size(), cfg.threads, [&](std::size_t p) {
      const PixelInputs& px = in.pixels[p];
      const auto steps = filter_series(px.clim, px.fusion, px.series, in.obs);
      out_of_range[p] = count_out_of_range(steps);
      std::string& s = chunks[p];
      for (std::size_t k = 0; k < steps.size(); ++k) {
        const GaussianBelief& post = steps[k].posterior;
        const double half = kCiZ * std::sqrt(post.variance());
        const YearMonth when = px.series.entries[k].when;
        s += std::to_string(px.series.pixel_id) + ',' + in.band + ',' +
             std::to_string(when.year) + ',' + std::to_string(when.month) + ',' +
             format_double(post.mean()) + ',' + format_double(post.variance()) + ',' +
             format_double(post.mean() - half) + ',' + format_double(post.mean() + half) + ',' +
             csv_bool(steps[k].observed) + '\n';
      }
    });
    for (const auto& c : chunks) out << c;
    std::size_t oor = 0;
    for (auto n : out_of_range) oor += n;
    if (oor) {
      warn("band " + band.name + ": " + std::to_string(oor) +
           " estimates fall outside [0, 1] (kept unclamped)");
    }
    progress("filter: band " + band.name + " R=" + format_double(in.obs.r()) + ", " +
             std::to_string(in.pixels.size()) + " pixels");
  }
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

void cmd_evaluate(const RunConfig& cfg) {
  require_input_dir(cfg);
  const fs::path dir = cfg.out_dir / "evaluate";
  fs::create_directories(dir);

  std::vector<MetricsEntry> report;
  std::vector<SkillRow> skill;
  bool have_truth = false;
  for (const BandSettings& band : selected_bands(cfg)) {
    const BandInputs in = assemble_band(cfg, band);
    std::vector<SiteWindow> sites = cfg.sites;
    if (sites.empty()) {
      sites.push_back({"all", 0, 0, in.geometry.width, in.geometry.height});
    }
    for (const auto& site : sites) {
      if (site.col1 > in.geometry.width || site.row1 > in.geometry.height) {
        config_error("site " + site.label + " extends beyond the grid");
      }
      std::vector<PixelInputs> pixels;
      for (std::size_t p : site.pixels(in.geometry.width)) pixels.push_back(in.pixels[p]);
      const LooResult loo = leave_one_out(pixels, in.obs, cfg.threads);
      if (loo.skipped_pixels) {
        warn("site " + site.label + " band " + band.name + ": skipped " +
             std::to_string(loo.skipped_pixels) + " pixels with < 2 valid observations");
      }
      if (loo.pairs.empty()) {
        warn("site " + site.label + " band " + band.name + ": no held-out observations");
        continue;
      }
      MetricsEntry m = metrics(loo.pairs);
      m.site = site.label;
      m.band = band.name;
      report.push_back(std::move(m));
    }
    const fs::path truth_path = cfg.input_dir / "truth" / (band.name + "_truth.csv");
    if (fs::exists(truth_path)) {
      have_truth = true;
      const auto rows = skill_against_truth(in, read_series_csv(truth_path));
      skill.insert(skill.end(), rows.begin(), rows.end());
    }
  }

  {
    std::ofstream out(dir / "metrics.csv", std::ios::binary | std::ios::trunc);
    write_metrics_csv(out, report);
  }
  const std::string table = render_table(report);
  {
    std::ofstream out(dir / "table.txt", std::ios::binary | std::ios::trunc);
    out << table;
  }
  {
    std::ofstream out(dir / "rho_pixels.csv", std::ios::binary | std::ios::trunc);
    out << "site,band,pixel_id,rho\n";
    for (const auto& m : report) {
      for (const auto& r : m.pixel_rho) {
        out << m.site << ',' << m.band << ',' << r.pixel_id << ',' << format_double(r.rho) << '\n';
      }
    }
  }
  if (have_truth) {
    std::ofstream out(dir / "skill.csv", std::ios::binary | std::ios::trunc);
    out << "band,method,rmse,n\n";
    for (const auto& s : skill) {
      out << s.band << ',' << s.method << ',' << format_double(s.rmse) << ',' << s.n << '\n';
    }
  }
  std::cout << table;
}

std::vector<FilteredRow> read_filtered_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) ||
      line != "pixel_id,band,year,month,estimate,variance,ci_low,ci_high,observed") {
    throw Error(ErrorCode::Format, path.string() + ": header mismatch");
  }
  std::vector<FilteredRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != 9) throw Error(ErrorCode::Format, path.string() + ": bad row '" + line + "'");
    FilteredRow r;
    r.pixel_id = std::stoll(f[0]);
    r.band = f[1];
    r.when = {std::stoi(f[2]), std::stoi(f[3])};
    r.estimate = parse_double(f[4]);
    r.variance = parse_double(f[5]);
    r.ci_low = parse_double(f[6]);
    r.ci_high = parse_double(f[7]);
    r.observed = f[8] == "1";
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace oifuse
