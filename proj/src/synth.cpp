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

#include "oifuse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "oifuse/error.hpp"
#include "oifuse/parallel.hpp"

namespace oifuse {

namespace {

// Substream tags. Every random quantity is drawn from the stream identified
// by (seed, tag, band, index).
enum class Stream : std::uint64_t {
  PixelOffset = 1,
  Gap = 2,
  FineNoise = 3,
  Anomaly = 4,
  CoarseNoise = 5,
  CoarseGap = 6,
  Spike = 7,
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 substream(std::uint64_t seed, Stream tag, std::size_t band, std::size_t index) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
  h = splitmix64(h ^ static_cast<std::uint64_t>(band));
  h = splitmix64(h ^ static_cast<std::uint64_t>(index));
  return std::mt19937_64(h);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::ConfigInvalid, "synthetic config: " + what);
}

bool nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

std::vector<SyntheticBand> SyntheticConfig::default_bands() {
  SyntheticBand red;
  red.name = "B3";
  red.baseline = 0.08;
  red.amplitude = 0.03;
  red.phase = 10.0;  // minimum in July
  red.fusion_slope = 0.9;
  red.fusion_intercept = 0.01;
  red.interannual_sd = 0.03;

  SyntheticBand nir;
  nir.name = "B4";
  nir.baseline = 0.30;
  nir.amplitude = 0.12;
  nir.phase = 4.0;  // maximum in July
  nir.fusion_slope = 0.85;
  nir.fusion_intercept = 0.03;
  nir.interannual_sd = 0.03;
  return {red, nir};
}

void SyntheticConfig::validate() const {
  require(width > 0 && height > 0, "width and height must be positive");
  require(years >= 1, "years must be >= 1");
  require(coarse_block >= 1, "coarse_block must be >= 1");
  require(std::isfinite(fine_pixel_size) && fine_pixel_size > 0.0,
          "fine_pixel_size must be positive");
  require(nonneg(fine_noise_sd) && nonneg(coarse_noise_sd) && nonneg(heterogeneity_sd),
          "standard deviations must be >= 0");
  require(nonneg(cloud_gap_fraction) && cloud_gap_fraction < 1.0,
          "cloud_gap_fraction must lie in [0, 1)");
  require(nonneg(coarse_gap_fraction) && coarse_gap_fraction <= 1.0,
          "coarse_gap_fraction must lie in [0, 1]");
  require(nonneg(spike_probability) && spike_probability <= 1.0 &&
              std::isfinite(spike_magnitude),
          "spike_probability must lie in [0, 1]");
  for (int m : forced_gap_months) require(m >= 1 && m <= 12, "forced gap month out of range");
  require(!bands.empty(), "at least one band is required");
  std::set<std::string> names;
  for (const auto& b : bands) {
    require(!b.name.empty() && names.insert(b.name).second, "band names must be unique");
    require(std::isfinite(b.baseline) && std::isfinite(b.amplitude) && std::isfinite(b.phase),
            "band " + b.name + ": signal parameters must be finite");
    require(std::isfinite(b.fusion_slope) && b.fusion_slope != 0.0 &&
                std::isfinite(b.fusion_intercept),
            "band " + b.name + ": fusion slope must be finite and non-zero");
    require(nonneg(b.interannual_sd), "band " + b.name + ": interannual_sd must be >= 0");
  }
}

double seasonal_signal(const SyntheticBand& band, int month) {
  return band.baseline +
         band.amplitude * std::sin(2.0 * std::numbers::pi * (month - band.phase) / 12.0);
}

SyntheticSite generate_site(const SyntheticConfig& config, unsigned threads) {
  config.validate();

  SyntheticSite site;
  site.config = config;
  const double size = config.fine_pixel_size;
  site.fine_geometry = {config.width, config.height, 0.0,
                        static_cast<double>(config.height) * size, size, -size};
  const std::size_t block = config.coarse_block;
  const std::size_t cw = (config.width + block - 1) / block;
  const std::size_t ch = (config.height + block - 1) / block;
  const double csize = size * static_cast<double>(block);
  site.coarse_geometry = {cw, ch, 0.0, static_cast<double>(config.height) * size, csize, -csize};

  const std::size_t npix = site.fine_geometry.size();
  const std::size_t nblocks = site.coarse_geometry.size();
  const std::size_t nb = config.bands.size();
  const int months = config.months();
  const auto when = [&](int t) { return YearMonth{config.first_year + t / 12, t % 12 + 1}; };
  const auto block_of = [&](std::size_t p) {
    const std::size_t row = p / config.width;
    const std::size_t col = p % config.width;
    return (row / block) * cw + col / block;
  };

  site.bands.resize(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    auto& data = site.bands[b];
    data.name = config.bands[b].name;
    for (int t = 0; t < months; ++t) {
      data.truth.push_back({when(t), SceneGrid(site.fine_geometry, data.name)});
      data.fine_obs.push_back({when(t), SceneGrid(site.fine_geometry, data.name)});
      data.coarse_obs.push_back({when(t), SceneGrid(site.coarse_geometry, data.name)});
    }
  }
  site.gap_mask.assign(static_cast<std::size_t>(months) * npix, 0);

  // Block-level draws: anomaly per band and month, spikes shared by bands.
  std::vector<double> anomaly(nb * nblocks * static_cast<std::size_t>(months), 0.0);
  std::vector<double> spike(nblocks * static_cast<std::size_t>(months), 0.0);
  const auto anomaly_at = [&](std::size_t b, std::size_t blk, int t) -> double& {
    return anomaly[(b * nblocks + blk) * static_cast<std::size_t>(months) +
                   static_cast<std::size_t>(t)];
  };
  parallel_for(nblocks, threads, [&](std::size_t blk) {
    for (std::size_t b = 0; b < nb; ++b) {
      auto rng = substream(config.seed, Stream::Anomaly, b, blk);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (int t = 0; t < months; ++t) {
        anomaly_at(b, blk, t) = config.bands[b].interannual_sd * normal(rng);
      }
    }
    auto rng = substream(config.seed, Stream::Spike, 0, blk);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int t = 0; t < months; ++t) {
      if (unif(rng) < config.spike_probability) {
        spike[blk * static_cast<std::size_t>(months) + static_cast<std::size_t>(t)] =
            config.spike_magnitude;
      }
    }
  });

  const int target_first = 12 * config.years;
  parallel_for(npix, threads, [&](std::size_t p) {
    const std::size_t blk = block_of(p);
    auto gap_rng = substream(config.seed, Stream::Gap, 0, p);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int t = 0; t < months; ++t) {
      bool gap = unif(gap_rng) < config.cloud_gap_fraction;
      if (t >= target_first &&
          std::find(config.forced_gap_months.begin(), config.forced_gap_months.end(),
                    t % 12 + 1) != config.forced_gap_months.end()) {
        gap = true;
      }
      site.gap_mask[static_cast<std::size_t>(t) * npix + p] = gap ? 1 : 0;
    }
    for (std::size_t b = 0; b < nb; ++b) {
      const SyntheticBand& band = config.bands[b];
      auto offset_rng = substream(config.seed, Stream::PixelOffset, b, p);
      auto noise_rng = substream(config.seed, Stream::FineNoise, b, p);
      std::normal_distribution<double> normal(0.0, 1.0);
      const double offset = config.heterogeneity_sd * normal(offset_rng);
      for (int t = 0; t < months; ++t) {
        const double truth = seasonal_signal(band, t % 12 + 1) + offset + anomaly_at(b, blk, t) +
                             spike[blk * static_cast<std::size_t>(months) +
                                   static_cast<std::size_t>(t)];
        const double noise = config.fine_noise_sd * normal(noise_rng);
        auto& data = site.bands[b];
        data.truth[static_cast<std::size_t>(t)].grid.values[p] = static_cast<float>(truth);
        if (!site.gap_mask[static_cast<std::size_t>(t) * npix + p]) {
          data.fine_obs[static_cast<std::size_t>(t)].grid.values[p] =
              static_cast<float>(truth + noise);
        }
      }
    }
  });

  // Coarse observations: block mean of the truth pushed through the inverse
  // fusion map, plus sensor noise.
  parallel_for(nblocks, threads, [&](std::size_t blk) {
    const std::size_t brow = blk / cw;
    const std::size_t bcol = blk % cw;
    const std::size_t r0 = brow * block;
    const std::size_t c0 = bcol * block;
    const std::size_t r1 = std::min(config.height, r0 + block);
    const std::size_t c1 = std::min(config.width, c0 + block);
    const double count = static_cast<double>((r1 - r0) * (c1 - c0));

    auto gap_rng = substream(config.seed, Stream::CoarseGap, 0, blk);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<char> coarse_gap(static_cast<std::size_t>(months));
    for (auto& g : coarse_gap) g = unif(gap_rng) < config.coarse_gap_fraction;

    for (std::size_t b = 0; b < nb; ++b) {
      const SyntheticBand& band = config.bands[b];
      auto noise_rng = substream(config.seed, Stream::CoarseNoise, b, blk);
      std::normal_distribution<double> normal(0.0, 1.0);
      auto& data = site.bands[b];
      for (int t = 0; t < months; ++t) {
        const auto& truth = data.truth[static_cast<std::size_t>(t)].grid.values;
        double sum = 0.0;
        for (std::size_t r = r0; r < r1; ++r) {
          for (std::size_t c = c0; c < c1; ++c) {
            sum += (static_cast<double>(truth[r * config.width + c]) - band.fusion_intercept) /
                   band.fusion_slope;
          }
        }
        const double noise = config.coarse_noise_sd * normal(noise_rng);
        if (!coarse_gap[static_cast<std::size_t>(t)]) {
          data.coarse_obs[static_cast<std::size_t>(t)].grid.values[blk] =
              static_cast<float>(sum / count + noise);
        }
      }
    }
  });
  return site;
}

}  // namespace oifuse
