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

#include "oifuse/evaluate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <tuple>

#include "oifuse/error.hpp"
#include "oifuse/grid_io.hpp"
#include "oifuse/parallel.hpp"

namespace oifuse {

std::vector<HeldOutPair> leave_one_out_pixel(const PixelInputs& pixel,
                                             const ObservationModel& obs) {
  const auto& entries = pixel.series.entries;
  const auto valid = std::count_if(entries.begin(), entries.end(),
                                   [](const SeriesEntry& e) { return e.obs.valid; });
  if (valid < 2) {
    throw Error(ErrorCode::InsufficientData,
                "pixel " + std::to_string(pixel.series.pixel_id) + " has " +
                    std::to_string(valid) + " valid observations");
  }

  std::vector<HeldOutPair> out;
  out.reserve(static_cast<std::size_t>(valid));
  PixelSeries fold = pixel.series;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (!entries[k].obs.valid) continue;
    fold.entries[k].obs = Observation::missing();
    const auto steps = filter_series(pixel.clim, pixel.fusion, fold, obs);
    out.push_back({pixel.series.pixel_id, k, steps[k].posterior.mean(), entries[k].obs.value});
    fold.entries[k].obs = entries[k].obs;
  }
  return out;
}

LooResult leave_one_out(std::span<const PixelInputs> pixels, const ObservationModel& obs,
                        unsigned threads) {
  std::vector<std::vector<HeldOutPair>> per_pixel(pixels.size());
  std::vector<char> skipped(pixels.size(), 0);
  parallel_for(pixels.size(), threads, [&](std::size_t i) {
    try {
      per_pixel[i] = leave_one_out_pixel(pixels[i], obs);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientData) throw;
      skipped[i] = 1;
    }
  });

  LooResult res;
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    res.skipped_pixels += skipped[i];
    res.pairs.insert(res.pairs.end(), per_pixel[i].begin(), per_pixel[i].end());
  }
  std::stable_sort(res.pairs.begin(), res.pairs.end(),
                   [](const HeldOutPair& a, const HeldOutPair& b) {
                     return std::tie(a.pixel_id, a.step) < std::tie(b.pixel_id, b.step);
                   });
  return res;
}

namespace {

std::optional<double> pearson(std::span<const HeldOutPair> pairs) {
  if (pairs.size() < 3) return std::nullopt;
  // A constant series has no correlation. Test it exactly: the two-pass
  // variance of equal values can come out as round-off instead of zero.
  const auto constant = [&](double HeldOutPair::*field) {
    return std::all_of(pairs.begin(), pairs.end(),
                       [&](const HeldOutPair& p) { return p.*field == pairs.front().*field; });
  };
  if (constant(&HeldOutPair::prediction) || constant(&HeldOutPair::truth)) return std::nullopt;
  const double n = static_cast<double>(pairs.size());
  double sp = 0.0;
  double st = 0.0;
  for (const auto& p : pairs) {
    sp += p.prediction;
    st += p.truth;
  }
  const double mp = sp / n;
  const double mt = st / n;
  double cov = 0.0;
  double vp = 0.0;
  double vt = 0.0;
  for (const auto& p : pairs) {
    const double dp = p.prediction - mp;
    const double dt = p.truth - mt;
    cov += dp * dt;
    vp += dp * dp;
    vt += dt * dt;
  }
  if (!(vp > 0.0) || !(vt > 0.0)) return std::nullopt;
  const double r = cov / std::sqrt(vp * vt);
  return std::clamp(r, -1.0, 1.0);
}

}  // namespace

MetricsEntry metrics(std::span<const HeldOutPair> pairs) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyInput, "no held-out pairs to score");

  std::vector<HeldOutPair> sorted(pairs.begin(), pairs.end());
  std::sort(sorted.begin(), sorted.end(), [](const HeldOutPair& a, const HeldOutPair& b) {
    return std::tie(a.pixel_id, a.step) < std::tie(b.pixel_id, b.step);
  });

  MetricsEntry m;
  double sum = 0.0;
  double sum_abs = 0.0;
  double sum_sq = 0.0;
  for (const auto& p : sorted) {
    const double e = p.prediction - p.truth;
    sum += e;
    sum_abs += std::abs(e);
    sum_sq += e * e;
  }
  const double n = static_cast<double>(sorted.size());
  m.n_heldout = sorted.size();
  m.me = sum / n;
  m.mae = sum_abs / n;
  m.rmse = std::sqrt(sum_sq / n);

  double rho_sum = 0.0;
  for (std::size_t begin = 0; begin < sorted.size();) {
    std::size_t end = begin;
    while (end < sorted.size() && sorted[end].pixel_id == sorted[begin].pixel_id) ++end;
    const auto group = std::span<const HeldOutPair>(sorted).subspan(begin, end - begin);
    if (const auto r = pearson(group)) {
      m.pixel_rho.push_back({sorted[begin].pixel_id, *r});
      rho_sum += *r;
    }
    begin = end;
  }
  m.rho_pixels = m.pixel_rho.size();
  m.mean_rho = m.rho_pixels ? rho_sum / static_cast<double>(m.rho_pixels) : 0.0;
  return m;
}

double estimate_r(const PixelArchive& archive, const Climatology& clim, double factor) {
  if (archive.pixel_count() != clim.pixel_count) {
    throw Error(ErrorCode::GeometryMismatch, "archive and climatology differ in pixel count");
  }
  if (!(factor >= 0.0) || !std::isfinite(factor)) {
    throw Error(ErrorCode::InvalidArgument, "R factor must be finite and >= 0");
  }
  std::vector<const ArchiveLayer*> layers;
  for (const auto& l : archive.layers()) {
    if (l.when.year >= clim.first_year && l.when.year <= clim.last_year) layers.push_back(&l);
  }
  std::sort(layers.begin(), layers.end(),
            [](const ArchiveLayer* a, const ArchiveLayer* b) { return a->when < b->when; });

  std::vector<double> residuals;
  for (const ArchiveLayer* l : layers) {
    for (std::size_t p = 0; p < archive.pixel_count(); ++p) {
      const float v = l->values[p];
      if (std::isnan(v)) continue;
      const std::size_t idx = Climatology::index(p, l->when.month, clim.pixel_count);
      const double median =
          clim.sample_count[idx] ? clim.median[idx] : clim.fallback.mean();
      residuals.push_back(static_cast<double>(v) - median);
    }
  }
  if (residuals.empty()) {
    throw Error(ErrorCode::EmptyArchive, "no valid archive records to estimate R from");
  }
  double sum = 0.0;
  for (double r : residuals) sum += r;
  const double mean = sum / static_cast<double>(residuals.size());
  double ss = 0.0;
  for (double r : residuals) ss += (r - mean) * (r - mean);
  const double var = ss / static_cast<double>(residuals.size());
  return std::max(factor * var, kRFloor);
}

std::vector<std::size_t> SiteWindow::pixels(std::size_t grid_width) const {
  std::vector<std::size_t> out;
  for (std::size_t r = row0; r < row1; ++r) {
    for (std::size_t c = col0; c < col1; ++c) out.push_back(r * grid_width + c);
  }
  return out;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsEntry> report) {
  out << "site,band,me,rmse,mae,mean_rho,n_heldout\n";
  for (const auto& m : report) {
    out << m.site << ',' << m.band << ',' << format_double(m.me) << ','
        << format_double(m.rmse) << ',' << format_double(m.mae) << ','
        << format_double(m.mean_rho) << ',' << m.n_heldout << '\n';
  }
}

std::string band_heading(const std::string& band) {
  if (band.size() > 1 && (band[0] == 'B' || band[0] == 'b') &&
      std::all_of(band.begin() + 1, band.end(),
                  [](unsigned char c) { return std::isdigit(c) != 0; })) {
    return "Band " + band.substr(1);
  }
  return "Band " + band;
}

std::string render_table(std::span<const MetricsEntry> report) {
  std::vector<std::string> bands;
  for (const auto& m : report) {
    if (std::find(bands.begin(), bands.end(), m.band) == bands.end()) bands.push_back(m.band);
  }

  std::ostringstream os;
  char line[160];
  const std::string rule(54, '-');
  std::snprintf(line, sizeof line, "%-8s %10s %10s %10s %10s", "Site", "ME", "RMSE", "MAE",
                "Mean rho");
  os << rule << '\n' << line << '\n' << rule << '\n';
  for (const auto& band : bands) {
    os << band_heading(band) << '\n';
    for (const auto& m : report) {
      if (m.band != band) continue;
      std::snprintf(line, sizeof line, "%-8s %10.4f %10.4f %10.4f %10.2f", m.site.c_str(),
                    m.me, m.rmse, m.mae, m.mean_rho);
      os << line << '\n';
    }
    os << rule << '\n';
  }
  return os.str();
}

}  // namespace oifuse
