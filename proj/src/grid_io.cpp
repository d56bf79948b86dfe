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

#include "oifuse/grid_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "oifuse/error.hpp"

namespace oifuse {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "oifuse-grid";
constexpr int kVersion = 1;

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

template <typename T>
void write_plane(const fs::path& path, std::span<const T> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  std::vector<T> buf(data.begin(), data.end());
  for (T& v : buf) v = to_little(v);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(T)));
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

template <typename T>
std::vector<T> read_plane(const fs::path& path, std::size_t count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  if (ec || size != count * sizeof(T)) {
    throw Error(ErrorCode::Format, path.string() + " has " + std::to_string(size) +
                                       " bytes, expected " +
                                       std::to_string(count * sizeof(T)));
  }
  std::vector<T> buf(count);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * sizeof(T)));
  if (!in) throw Error(ErrorCode::Io, "read failed: " + path.string());
  for (T& v : buf) v = to_little(v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, path.string() + ": " + e.what());
  }
}

fs::path with_ext(const fs::path& base, const char* ext) {
  return fs::path(base.string() + ext);
}

json meta_to_json(const GridMeta& m) {
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["width"] = m.geometry.width;
  j["height"] = m.geometry.height;
  j["origin"] = {m.geometry.origin_x, m.geometry.origin_y};
  j["pixel_size"] = {m.geometry.pixel_width, m.geometry.pixel_height};
  j["band"] = m.band;
  j["kind"] = m.kind;
  j["dtype"] = m.dtype;
  j["scale_factor"] = m.scale_factor;
  j["nodata"] = m.nodata;
  j["qa_plane"] = m.qa_plane;
  j["qa_policy"] = m.qa_policy ? json(m.qa_policy->accepted) : json(nullptr);
  j["period"] = m.period ? json{{"year", m.period->year}, {"month", m.period->month}}
                         : json(nullptr);
  j["extra"] = json::parse(m.extra_json);
  return j;
}

GridMeta meta_from_json(const json& j, const std::string& origin) {
  try {
    if (j.at("format").get<std::string>() != kFormat) {
      throw Error(ErrorCode::Format, origin + ": not an oifuse grid sidecar");
    }
    GridMeta m;
    m.geometry.width = j.at("width").get<std::size_t>();
    m.geometry.height = j.at("height").get<std::size_t>();
    m.geometry.origin_x = j.at("origin").at(0).get<double>();
    m.geometry.origin_y = j.at("origin").at(1).get<double>();
    m.geometry.pixel_width = j.at("pixel_size").at(0).get<double>();
    m.geometry.pixel_height = j.at("pixel_size").at(1).get<double>();
    m.band = j.value("band", std::string());
    m.kind = j.value("kind", std::string("grid"));
    m.dtype = j.value("dtype", std::string("float32"));
    m.scale_factor = j.value("scale_factor", m.dtype == "float32" ? 1.0 : 10000.0);
    m.nodata = j.value("nodata", std::int32_t{-9999});
    m.qa_plane = j.value("qa_plane", false);
    if (j.contains("qa_policy") && !j["qa_policy"].is_null()) {
      m.qa_policy = QualityPolicy{j["qa_policy"].get<std::vector<std::int32_t>>()};
    }
    if (j.contains("period") && !j["period"].is_null()) {
      m.period = YearMonth{j["period"].at("year").get<int>(), j["period"].at("month").get<int>()};
    }
    m.extra_json = j.contains("extra") ? j["extra"].dump() : std::string("{}");
    if (m.dtype != "float32" && m.dtype != "int16") {
      throw Error(ErrorCode::Format, origin + ": unsupported dtype " + m.dtype);
    }
    if (m.geometry.pixel_width == 0.0 || m.geometry.pixel_height == 0.0 || !(m.scale_factor > 0.0)) {
      throw Error(ErrorCode::Format, origin + ": invalid pixel size or scale factor");
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, origin + ": " + e.what());
  }
}

std::string month_tag(int m) {
  char buf[3];
  std::snprintf(buf, sizeof buf, "%02d", m);
  return buf;
}

SceneGrid plane_grid(const GridGeometry& g, const std::string& band, std::vector<float> values) {
  SceneGrid s(g, band);
  s.values = std::move(values);
  return s;
}

}  // namespace

void write_grid(const fs::path& base, const SceneGrid& grid, GridMeta meta) {
  if (grid.values.size() != grid.geometry.size()) {
    throw Error(ErrorCode::GeometryMismatch, "grid values do not match its geometry");
  }
  meta.geometry = grid.geometry;
  meta.band = grid.band;
  if (!base.parent_path().empty()) fs::create_directories(base.parent_path());

  if (meta.dtype == "float32") {
    write_plane<float>(with_ext(base, ".grid"), grid.values);
  } else if (meta.dtype == "int16") {
    std::vector<std::int16_t> raw(grid.values.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const float v = grid.values[i];
      raw[i] = std::isnan(v) ? static_cast<std::int16_t>(meta.nodata)
                             : static_cast<std::int16_t>(std::lround(v * meta.scale_factor));
    }
    write_plane<std::int16_t>(with_ext(base, ".grid"), raw);
  } else {
    throw Error(ErrorCode::InvalidArgument, "unsupported dtype " + meta.dtype);
  }
  if (meta.qa_plane) {
    if (grid.qa.size() != grid.values.size()) {
      throw Error(ErrorCode::GeometryMismatch, "qa plane does not match the value plane");
    }
    write_plane<std::int32_t>(with_ext(base, ".qa"), grid.qa);
  }
  write_text(with_ext(base, ".json"), meta_to_json(meta).dump(2) + "\n");
}

GridMeta read_grid_meta(const fs::path& sidecar) {
  return meta_from_json(read_json(sidecar), sidecar.string());
}

LoadedGrid read_grid(const fs::path& base, bool mask_range) {
  LoadedGrid out;
  out.meta = read_grid_meta(with_ext(base, ".json"));
  const GridGeometry& g = out.meta.geometry;
  out.grid = SceneGrid(g, out.meta.band);
  if (out.meta.dtype == "float32") {
    out.grid.values = read_plane<float>(with_ext(base, ".grid"), g.size());
  } else {
    const auto raw = read_plane<std::int16_t>(with_ext(base, ".grid"), g.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      out.grid.values[i] = raw[i] == out.meta.nodata
                               ? std::numeric_limits<float>::quiet_NaN()
                               : static_cast<float>(raw[i] / out.meta.scale_factor);
    }
  }
  if (out.meta.qa_plane) {
    out.grid.qa = read_plane<std::int32_t>(with_ext(base, ".qa"), g.size());
  }
  if (mask_range) out.grid = mask_implausible(std::move(out.grid));
  return out;
}

std::vector<fs::path> list_grids(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    json j;
    try {
      j = read_json(entry.path());
    } catch (const Error&) {
      continue;
    }
    if (j.is_object() && j.value("format", std::string()) == kFormat) {
      out.push_back(entry.path().parent_path() / entry.path().stem());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorCode::Format, "not a number: '" + std::string(text) + "'");
  }
  return v;
}

void write_series_csv(std::ostream& out, std::span<const PixelSeries> series) {
  out << "pixel_id,band,year,month,value,valid\n";
  for (const auto& s : series) {
    for (const auto& e : s.entries) {
      out << s.pixel_id << ',' << s.band << ',' << e.when.year << ',' << e.when.month << ','
          << (e.obs.valid ? format_double(e.obs.value) : std::string()) << ','
          << (e.obs.valid ? 1 : 0) << '\n';
    }
  }
}

void write_series_csv(const fs::path& path, std::span<const PixelSeries> series) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  write_series_csv(out, series);
}

std::vector<PixelSeries> read_series_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "pixel_id,band,year,month,value,valid") {
    throw Error(ErrorCode::Format, "series CSV header mismatch");
  }
  std::vector<PixelSeries> out;
  std::map<std::pair<std::string, std::int64_t>, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      f.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (f.size() != 6) {
      throw Error(ErrorCode::Format, "series CSV line " + std::to_string(line_no) +
                                         ": expected 6 fields");
    }
    std::int64_t pid = 0;
    int year = 0;
    int month = 0;
    auto ok = [](std::string_view s, auto& v) {
      const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      return r.ec == std::errc() && r.ptr == s.data() + s.size();
    };
    if (!ok(f[0], pid) || !ok(f[2], year) || !ok(f[3], month) || month < 1 || month > 12) {
      throw Error(ErrorCode::Format, "series CSV line " + std::to_string(line_no) +
                                         ": bad pixel id, year or month");
    }
    const bool valid = f[5] == "1" || f[5] == "true";
    if (!valid && f[5] != "0" && f[5] != "false") {
      throw Error(ErrorCode::Format, "series CSV line " + std::to_string(line_no) +
                                         ": bad valid flag");
    }
    SeriesEntry e;
    e.when = {year, month};
    if (valid) e.obs = Observation::of(parse_double(f[4]));

    const auto key = std::make_pair(std::string(f[1]), pid);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      out.push_back(PixelSeries{pid, std::string(f[1]), {}});
    }
    out[it->second].entries.push_back(e);
  }
  return out;
}

std::vector<PixelSeries> read_series_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_series_csv(in);
}

void write_climatology(const fs::path& dir, const Climatology& clim,
                       const GridGeometry& geometry, const std::string& extra_json) {
  if (geometry.size() != clim.pixel_count) {
    throw Error(ErrorCode::GeometryMismatch, "climatology does not match its geometry");
  }
  fs::create_directories(dir);
  const std::size_t n = clim.pixel_count;
  json counts = json::array();
  for (int m = 1; m <= 12; ++m) {
    std::vector<float> med(n);
    std::vector<float> sd(n);
    std::vector<std::uint32_t> cnt(n);
    for (std::size_t p = 0; p < n; ++p) {
      const std::size_t idx = Climatology::index(p, m, n);
      const bool absent = clim.sample_count[idx] == 0;
      med[p] = absent ? std::numeric_limits<float>::quiet_NaN()
                      : static_cast<float>(clim.median[idx]);
      sd[p] = absent ? std::numeric_limits<float>::quiet_NaN()
                     : static_cast<float>(clim.stddev[idx]);
      cnt[p] = clim.sample_count[idx];
    }
    counts.push_back(cnt);
    GridMeta meta;
    meta.kind = "climatology-median";
    meta.period = YearMonth{0, m};
    write_grid(dir / ("median_" + month_tag(m)), plane_grid(geometry, clim.band, std::move(med)),
               meta);
    meta.kind = "climatology-std";
    write_grid(dir / ("std_" + month_tag(m)), plane_grid(geometry, clim.band, std::move(sd)),
               meta);
  }
  json j;
  j["format"] = "oifuse-climatology";
  j["version"] = kVersion;
  j["band"] = clim.band;
  j["pixel_count"] = n;
  j["first_year"] = clim.first_year;
  j["last_year"] = clim.last_year;
  j["fallback"] = {{"mean", clim.fallback.mean()}, {"variance", clim.fallback.variance()}};
  j["small_sample_count"] = clim.small_sample_count;
  j["small_sample_inflation"] = clim.small_sample_inflation;
  j["sample_counts"] = std::move(counts);
  j["extra"] = json::parse(extra_json);
  write_text(dir / "climatology.json", j.dump() + "\n");
}

LoadedClimatology read_climatology(const fs::path& dir) {
  const json j = read_json(dir / "climatology.json");
  LoadedClimatology out;
  Climatology& c = out.clim;
  try {
    c.band = j.at("band").get<std::string>();
    c.pixel_count = j.at("pixel_count").get<std::size_t>();
    c.first_year = j.at("first_year").get<int>();
    c.last_year = j.at("last_year").get<int>();
    c.fallback = GaussianBelief(j.at("fallback").at("mean").get<double>(),
                                j.at("fallback").at("variance").get<double>());
    c.small_sample_count = j.at("small_sample_count").get<std::uint32_t>();
    c.small_sample_inflation = j.at("small_sample_inflation").get<double>();
    out.extra_json = j.contains("extra") ? j["extra"].dump() : std::string("{}");
    const std::size_t n = c.pixel_count;
    c.median.assign(12 * n, 0.0);
    c.stddev.assign(12 * n, 0.0);
    c.sample_count.assign(12 * n, 0);
    for (int m = 1; m <= 12; ++m) {
      const auto counts = j.at("sample_counts").at(m - 1).get<std::vector<std::uint32_t>>();
      const LoadedGrid med = read_grid(dir / ("median_" + month_tag(m)));
      const LoadedGrid sd = read_grid(dir / ("std_" + month_tag(m)));
      if (counts.size() != n || med.grid.values.size() != n || sd.grid.values.size() != n) {
        throw Error(ErrorCode::Format, dir.string() + ": climatology grids differ in size");
      }
      out.geometry = med.meta.geometry;
      for (std::size_t p = 0; p < n; ++p) {
        const std::size_t idx = Climatology::index(p, m, n);
        c.sample_count[idx] = counts[p];
        if (counts[p] == 0) continue;
        c.median[idx] = med.grid.values[p];
        c.stddev[idx] = sd.grid.values[p];
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, dir.string() + "/climatology.json: " + e.what());
  }
  return out;
}

void write_fusion_model(const fs::path& dir, const FusionModel& model,
                        const GridGeometry& geometry) {
  if (geometry.size() != model.pixels.size()) {
    throw Error(ErrorCode::GeometryMismatch, "fusion model does not match its geometry");
  }
  fs::create_directories(dir);
  const std::size_t n = model.pixels.size();
  auto plane = [&](auto field) {
    std::vector<float> v(n);
    for (std::size_t p = 0; p < n; ++p) v[p] = static_cast<float>(field(model.pixels[p]));
    return v;
  };
  const std::pair<const char*, std::vector<float>> planes[] = {
      {"slope", plane([](const LinearFusion& m) { return m.slope; })},
      {"intercept", plane([](const LinearFusion& m) { return m.intercept; })},
      {"residual_variance", plane([](const LinearFusion& m) { return m.residual_variance; })},
      {"n_pairs", plane([](const LinearFusion& m) { return static_cast<double>(m.n_pairs); })},
      {"degenerate", plane([](const LinearFusion& m) { return m.degenerate ? 1.0 : 0.0; })},
  };
  for (const auto& [name, values] : planes) {
    GridMeta meta;
    meta.kind = std::string("fusion-") + name;
    write_grid(dir / name, plane_grid(geometry, model.band, values), meta);
  }
  json j;
  j["format"] = "oifuse-fusion";
  j["version"] = kVersion;
  j["band"] = model.band;
  j["pixel_count"] = n;
  j["min_pairs"] = model.options.min_pairs;
  j["degenerate_var"] = model.options.degenerate_var;
  j["min_regressor_var"] = model.options.min_regressor_var;
  j["first_year"] = model.options.first_year;
  j["last_year"] = model.options.last_year;
  j["degenerate_count"] = model.degenerate_count();
  write_text(dir / "fusion.json", j.dump(2) + "\n");
}

LoadedFusion read_fusion_model(const fs::path& dir) {
  const json j = read_json(dir / "fusion.json");
  LoadedFusion out;
  FusionModel& m = out.model;
  try {
    m.band = j.at("band").get<std::string>();
    m.options.min_pairs = j.at("min_pairs").get<std::size_t>();
    m.options.degenerate_var = j.at("degenerate_var").get<double>();
    m.options.min_regressor_var = j.at("min_regressor_var").get<double>();
    m.options.first_year = j.at("first_year").get<int>();
    m.options.last_year = j.at("last_year").get<int>();
    const std::size_t n = j.at("pixel_count").get<std::size_t>();
    const LoadedGrid slope = read_grid(dir / "slope");
    const LoadedGrid intercept = read_grid(dir / "intercept");
    const LoadedGrid var = read_grid(dir / "residual_variance");
    const LoadedGrid pairs = read_grid(dir / "n_pairs");
    const LoadedGrid degenerate = read_grid(dir / "degenerate");
    for (const LoadedGrid* g : {&slope, &intercept, &var, &pairs, &degenerate}) {
      if (g->grid.values.size() != n) {
        throw Error(ErrorCode::Format, dir.string() + ": fusion grids differ in size");
      }
    }
    out.geometry = slope.meta.geometry;
    m.pixels.resize(n);
    for (std::size_t p = 0; p < n; ++p) {
      LinearFusion& f = m.pixels[p];
      f.slope = slope.grid.values[p];
      f.intercept = intercept.grid.values[p];
      f.residual_variance = var.grid.values[p];
      f.n_pairs = static_cast<std::size_t>(pairs.grid.values[p]);
      f.degenerate = degenerate.grid.values[p] != 0.0f;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, dir.string() + "/fusion.json: " + e.what());
  }
  return out;
}

}  // namespace oifuse
