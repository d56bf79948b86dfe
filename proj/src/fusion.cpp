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

#include "oifuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "oifuse/error.hpp"
#include "oifuse/parallel.hpp"

namespace oifuse {

namespace {

LinearFusion degenerate_model(std::size_t n, const FusionOptions& options) {
  LinearFusion m;
  m.slope = 1.0;
  m.intercept = 0.0;
  m.residual_variance = options.degenerate_var;
  m.n_pairs = n;
  m.degenerate = true;
  return m;
}

}  // namespace

LinearFusion fit_fusion_model(std::span<const CollocatedPair> pairs,
                              const FusionOptions& options) {
  const std::size_t n = pairs.size();
  for (const auto& p : pairs) {
    if (!std::isfinite(p.coarse_value) || !std::isfinite(p.fine_value)) {
      throw Error(ErrorCode::InvalidArgument, "collocated pair holds a non-finite value");
    }
  }
  if (n < options.min_pairs || n == 0) return degenerate_model(n, options);

  const double dn = static_cast<double>(n);
  double sx = 0.0;
  double sy = 0.0;
  for (const auto& p : pairs) {
    sx += p.coarse_value;
    sy += p.fine_value;
  }
  const double mx = sx / dn;
  const double my = sy / dn;

  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& p : pairs) {
    const double dx = p.coarse_value - mx;
    sxx += dx * dx;
    sxy += dx * (p.fine_value - my);
  }
  if (!(sxx / dn >= options.min_regressor_var)) {
    return degenerate_model(n, options);
  }

  LinearFusion m;
  m.slope = sxy / sxx;
  m.intercept = my - m.slope * mx;
  double ssr = 0.0;
  for (const auto& p : pairs) {
    const double r = p.fine_value - (m.slope * p.coarse_value + m.intercept);
    ssr += r * r;
  }
  m.residual_variance = ssr / static_cast<double>(n > 2 ? n - 2 : 1);
  m.n_pairs = n;
  m.degenerate = false;
  return m;
}

GaussianBelief apply_fusion(const LinearFusion& model, double coarse_value) {
  if (!std::isfinite(coarse_value)) {
    throw Error(ErrorCode::InvalidArgument, "coarse value must be finite");
  }
  const double var = std::isfinite(model.residual_variance)
                         ? std::max(model.residual_variance, kVarFloor)
                         : kVarFloor;
  if (model.degenerate) return {coarse_value, var};
  const double mean = model.slope * coarse_value + model.intercept;
  if (!std::isfinite(mean)) return {coarse_value, var};
  return {mean, var};
}

std::size_t FusionModel::degenerate_count() const {
  return static_cast<std::size_t>(std::count_if(
      pixels.begin(), pixels.end(), [](const LinearFusion& m) { return m.degenerate; }));
}

FusionModel fit_fusion_grid(const PixelArchive& fine, const PixelArchive& coarse,
                            const FusionOptions& options) {
  if (fine.pixel_count() != coarse.pixel_count()) {
    throw Error(ErrorCode::GeometryMismatch,
                "fine and collocated coarse archives differ in pixel count");
  }

  std::map<YearMonth, const ArchiveLayer*> coarse_by_month;
  for (const auto& layer : coarse.layers()) coarse_by_month[layer.when] = &layer;

  // Matched months in chronological order; pair order feeds the sums, so it
  // is fixed here rather than left to archive insertion order.
  std::vector<std::pair<const ArchiveLayer*, const ArchiveLayer*>> matched;
  std::vector<const ArchiveLayer*> fine_sorted;
  for (const auto& layer : fine.layers()) fine_sorted.push_back(&layer);
  std::sort(fine_sorted.begin(), fine_sorted.end(),
            [](const ArchiveLayer* a, const ArchiveLayer* b) { return a->when < b->when; });
  for (const ArchiveLayer* f : fine_sorted) {
    if (f->when.year < options.first_year || f->when.year > options.last_year) continue;
    auto it = coarse_by_month.find(f->when);
    if (it != coarse_by_month.end()) matched.emplace_back(f, it->second);
  }

  FusionModel model;
  model.band = fine.band();
  model.options = options;
  model.pixels.resize(fine.pixel_count());
  parallel_for(fine.pixel_count(), options.threads, [&](std::size_t p) {
    std::vector<CollocatedPair> pairs;
    pairs.reserve(matched.size());
    for (const auto& [f, c] : matched) {
      const float fv = f->values[p];
      const float cv = c->values[p];
      if (std::isnan(fv) || std::isnan(cv)) continue;
      pairs.push_back({cv, fv, f->when.ordinal()});
    }
    model.pixels[p] = fit_fusion_model(pairs, options);
  });
  return model;
}

}  // namespace oifuse
