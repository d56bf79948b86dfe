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

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace oifuse {

/// Lower bound applied to every variance (reflectance^2).
inline constexpr double kVarFloor = 1e-8;
/// Lower bound applied to the observation-noise variance R.
inline constexpr double kRFloor = 1e-10;

/// A reflectance estimate with its uncertainty. The variance never drops
/// below kVarFloor and the mean is always finite.
class GaussianBelief {
 public:
  GaussianBelief() = default;
  /// Throws Error(InvalidArgument) on a non-finite mean or a NaN/negative
  /// variance; sub-floor variances are clamped.
  GaussianBelief(double mean, double variance);

  double mean() const noexcept { return mean_; }
  double variance() const noexcept { return variance_; }

  bool operator==(const GaussianBelief&) const = default;

 private:
  double mean_ = 0.0;
  double variance_ = kVarFloor;
};

/// y = h * x + v, v ~ N(0, r).
class ObservationModel {
 public:
  ObservationModel() = default;
  /// h must be finite and non-zero; r must be finite and >= 0 (clamped to
  /// kRFloor).
  ObservationModel(double h, double r);

  double h() const noexcept { return h_; }
  double r() const noexcept { return r_; }

 private:
  double h_ = 1.0;
  double r_ = 1.0;
};

struct Observation {
  double value = 0.0;
  bool valid = false;

  static Observation missing() { return {}; }
  static Observation of(double v) { return {v, true}; }

  /// Invalid observations compare equal regardless of their stored value.
  friend bool operator==(const Observation& a, const Observation& b) {
    return a.valid == b.valid && (!a.valid || a.value == b.value);
  }
};

struct YearMonth {
  int year = 0;
  int month = 1;  // 1..12

  auto operator<=>(const YearMonth&) const = default;

  int ordinal() const noexcept { return year * 12 + (month - 1); }
  static YearMonth from_ordinal(int ordinal) {
    return {ordinal / 12, ordinal % 12 + 1};
  }
};

struct SeriesEntry {
  YearMonth when;
  Observation obs;

  bool operator==(const SeriesEntry&) const = default;
};

/// One pixel's monthly observations for one band: exactly one entry per
/// month of the period, gaps stored as invalid observations.
struct PixelSeries {
  std::int64_t pixel_id = 0;
  std::string band;
  std::vector<SeriesEntry> entries;

  bool operator==(const PixelSeries&) const = default;
};

}  // namespace oifuse
