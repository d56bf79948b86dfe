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

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "oifuse/core_model.hpp"
#include "oifuse/error.hpp"
#include "support/grid_bayes.hpp"

using namespace oifuse;
using oifuse::testing::Factor;

namespace {

PixelSeries make_series(const std::vector<Observation>& obs, int year = 2010) {
  PixelSeries s;
  s.pixel_id = 7;
  s.band = "B3";
  for (std::size_t i = 0; i < obs.size(); ++i) {
    s.entries.push_back({{year, static_cast<int>(i % 12) + 1}, obs[i]});
  }
  return s;
}

std::array<GaussianBelief, 12> twelve_beliefs() {
  std::array<GaussianBelief, 12> c;
  for (int m = 0; m < 12; ++m) c[static_cast<std::size_t>(m)] = {0.1 + 0.01 * m, 0.001 * (m + 1)};
  return c;
}

}  // namespace

TEST(GaussianBelief, RejectsNonFiniteAndNegative) {
  EXPECT_THROW(GaussianBelief(std::nan(""), 1.0), Error);
  EXPECT_THROW(GaussianBelief(INFINITY, 1.0), Error);
  EXPECT_THROW(GaussianBelief(0.1, -1.0), Error);
  EXPECT_THROW(GaussianBelief(0.1, std::nan("")), Error);
  EXPECT_THROW(GaussianBelief(0.1, INFINITY), Error);
}

TEST(GaussianBelief, ClampsToFloor) {
  EXPECT_EQ(GaussianBelief(0.3, 0.0).variance(), kVarFloor);
  EXPECT_EQ(GaussianBelief(0.3, 1e-12).variance(), kVarFloor);
  EXPECT_EQ(GaussianBelief(0.3, 0.02).variance(), 0.02);
}

TEST(ObservationModel, Validation) {
  EXPECT_THROW(ObservationModel(0.0, 1.0), Error);
  EXPECT_THROW(ObservationModel(std::nan(""), 1.0), Error);
  EXPECT_THROW(ObservationModel(1.0, -0.1), Error);
  EXPECT_THROW(ObservationModel(1.0, INFINITY), Error);
  EXPECT_EQ(ObservationModel(1.0, 0.0).r(), kRFloor);
}

TEST(Predict, EqualPriorsHalveVariance) {
  const auto p = predict({0.5, 0.02}, {0.5, 0.02});
  EXPECT_DOUBLE_EQ(p.mean(), 0.5);
  EXPECT_DOUBLE_EQ(p.variance(), 0.01);
}

TEST(Predict, UnequalPriors) {
  const auto p = predict({0.1, 0.01}, {0.3, 0.03});
  EXPECT_NEAR(p.mean(), 0.15, 1e-15);
  EXPECT_NEAR(p.variance(), 0.0075, 1e-15);

  const auto oracle = oifuse::testing::posterior({{1, 0.1, 0.01}, {1, 0.3, 0.03}});
  EXPECT_NEAR(p.mean(), oracle.mean, 1e-6);
  EXPECT_NEAR(p.variance(), oracle.variance, 1e-6 * oracle.variance);
}

TEST(Predict, DominantPrior) {
  const auto p = predict({0.2, 0.0001}, {0.9, 10.0});
  EXPECT_NEAR(p.mean(), 0.2, 1e-4);
  EXPECT_NEAR(p.variance(), 0.0001, 0.01 * 0.0001);
}

TEST(Predict, PrecisionAdditivityAndSymmetry) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mean(-0.2, 1.2);
  std::uniform_real_distribution<double> logvar(std::log(1e-7), std::log(10.0));
  for (int i = 0; i < 10'000; ++i) {
    const GaussianBelief a(mean(rng), std::exp(logvar(rng)));
    const GaussianBelief b(mean(rng), std::exp(logvar(rng)));
    const auto ab = predict(a, b);
    const auto ba = predict(b, a);
    const double lhs = 1.0 / ab.variance();
    const double rhs = 1.0 / a.variance() + 1.0 / b.variance();
    ASSERT_LE(std::abs(lhs - rhs), 1e-12 * rhs);
    ASSERT_LE(std::abs(ab.mean() - ba.mean()), 1e-15 * std::max(1.0, std::abs(ab.mean())));
    ASSERT_LE(std::abs(ab.variance() - ba.variance()), 1e-15 * ab.variance());
  }
}

TEST(KalmanGain, Examples) {
  EXPECT_DOUBLE_EQ(kalman_gain(1.0, {1.0, 1.0}), 0.5);
  EXPECT_NEAR(kalman_gain(0.01, {1.0, 1e9}), 0.0, 1e-8);
  EXPECT_NEAR(kalman_gain(0.02, {0.5, 0.005}), 1.0, 1e-14);
}

TEST(KalmanGain, MeanShiftMatchesOracle) {
  // K = 1 with H = 0.5: the posterior mean moves by K (y - H x).
  const double x = 0.3;
  const double y = 0.4;
  const auto oracle = oifuse::testing::posterior({{1, x, 0.02}, {0.5, y, 0.005}});
  const double k = kalman_gain(0.02, {0.5, 0.005});
  EXPECT_NEAR(x + k * (y - 0.5 * x), oracle.mean, 1e-6);
}

TEST(KalmanGain, Bounds) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> logp(std::log(kVarFloor), std::log(1.0));
  std::uniform_real_distribution<double> logr(std::log(1e-8), std::log(1.0));
  std::uniform_real_distribution<double> h(0.2, 2.0);
  for (int i = 0; i < 10'000; ++i) {
    const ObservationModel obs(h(rng), std::exp(logr(rng)));
    const double kh = kalman_gain(std::exp(logp(rng)), obs) * obs.h();
    ASSERT_GT(kh, 0.0);
    ASSERT_LT(kh, 1.0);
  }
}

TEST(Update, MidpointExample) {
  const auto u = update({0.2, 1.0}, Observation::of(0.4), {1.0, 1.0});
  EXPECT_DOUBLE_EQ(u.posterior.mean(), 0.3);
  EXPECT_DOUBLE_EQ(u.posterior.variance(), 0.5);
  EXPECT_DOUBLE_EQ(u.gain, 0.5);
}

TEST(Update, MissingObservationPassesThrough) {
  const GaussianBelief pred(0.2, 0.01);
  const auto u = update(pred, Observation::missing(), {1.0, 1.0});
  EXPECT_EQ(u.posterior, pred);
  EXPECT_EQ(u.gain, 0.0);
}

TEST(Update, FixedGridOracle) {
  const auto u = update({0.1, 0.04}, Observation::of(0.5), {1.0, 0.01});
  const auto oracle =
      oifuse::testing::grid_moments({{1, 0.1, 0.04}, {1, 0.5, 0.01}}, -1.0, 2.0, 1'000'000);
  EXPECT_NEAR(u.posterior.mean(), oracle.mean, 1e-6);
  EXPECT_NEAR(u.posterior.variance(), oracle.variance, 1e-6 * oracle.variance);
}

TEST(Update, VarianceContraction) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> logp(std::log(1e-6), std::log(1.0));
  std::uniform_real_distribution<double> logr(std::log(1e-6), std::log(1.0));
  std::uniform_real_distribution<double> y(0.0, 1.0);
  for (int i = 0; i < 5'000; ++i) {
    const GaussianBelief pred(y(rng), std::exp(logp(rng)));
    const ObservationModel obs(1.0, std::exp(logr(rng)));
    ASSERT_LT(update(pred, Observation::of(y(rng)), obs).posterior.variance(), pred.variance());
    ASSERT_EQ(update(pred, Observation::missing(), obs).posterior.variance(), pred.variance());
  }
}

TEST(Update, Limits) {
  const GaussianBelief pred(0.2, 0.01);
  const auto vague = update(pred, Observation::of(0.8), {1.0, 1e12});
  EXPECT_NEAR(vague.posterior.mean(), 0.2, 1e-12);
  EXPECT_NEAR(vague.posterior.variance(), 0.01, 1e-12);

  const auto sharp = update(pred, Observation::of(0.8), {2.0, 0.0});
  EXPECT_NEAR(sharp.posterior.mean(), 0.4, 1e-8);
}

TEST(FilterStep, ClimatologyOnlyNoObservation) {
  const auto s = filter_step({0.3, 0.02}, std::nullopt, Observation::missing(), {});
  EXPECT_EQ(s.posterior, GaussianBelief(0.3, 0.02));
  EXPECT_EQ(s.predicted, s.posterior);
  EXPECT_FALSE(s.observed);
}

TEST(FilterStep, FusionNoObservation) {
  const auto s = filter_step({0.1, 0.01}, GaussianBelief{0.3, 0.03}, Observation::missing(), {});
  EXPECT_NEAR(s.posterior.mean(), 0.15, 1e-15);
  EXPECT_NEAR(s.posterior.variance(), 0.0075, 1e-15);
}

TEST(FilterStep, ThreeGaussians) {
  const auto s =
      filter_step({0.1, 0.01}, GaussianBelief{0.3, 0.03}, Observation::of(0.2), {1.0, 0.0075});
  EXPECT_NEAR(s.gain, 0.5, 1e-14);
  EXPECT_NEAR(s.posterior.mean(), 0.175, 1e-14);
  EXPECT_NEAR(s.posterior.variance(), 0.00375, 1e-15);
  EXPECT_TRUE(s.observed);

  const auto oracle =
      oifuse::testing::posterior({{1, 0.1, 0.01}, {1, 0.3, 0.03}, {1, 0.2, 0.0075}});
  EXPECT_NEAR(s.posterior.mean(), oracle.mean, 1e-6);
  EXPECT_NEAR(s.posterior.variance(), oracle.variance, 1e-6 * oracle.variance);
}

TEST(FilterStep, RandomTuplesAgainstGridBayes) {
  // A lighter variant of the acceptance run, on 100k-point grids.
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> mean(0.0, 1.0);
  std::uniform_real_distribution<double> logv(std::log(1e-4), std::log(0.05));
  std::uniform_real_distribution<double> h(0.5, 1.5);
  for (int i = 0; i < 100; ++i) {
    const GaussianBelief clim(mean(rng), std::exp(logv(rng)));
    const GaussianBelief fus(mean(rng), std::exp(logv(rng)));
    const ObservationModel obs(h(rng), std::exp(logv(rng)));
    const double y = mean(rng);
    const auto s = filter_step(clim, fus, Observation::of(y), obs);
    const auto o = oifuse::testing::posterior({{1, clim.mean(), clim.variance()},
                                               {1, fus.mean(), fus.variance()},
                                               {obs.h(), y, obs.r()}},
                                              100'000);
    ASSERT_NEAR(s.posterior.mean(), o.mean, 1e-6);
    ASSERT_NEAR(s.posterior.variance(), o.variance, 1e-6 * o.variance);
  }
}

TEST(FilterSeries, AllMissingReturnsClimatology) {
  const auto clim = twelve_beliefs();
  const auto series = make_series(std::vector<Observation>(12, Observation::missing()));
  const std::vector<std::optional<GaussianBelief>> fusion(12);
  const auto steps = filter_series(clim, fusion, series, {});
  ASSERT_EQ(steps.size(), 12u);
  for (std::size_t t = 0; t < 12; ++t) EXPECT_EQ(steps[t].posterior, clim[t]);
}

TEST(FilterSeries, EqualsIndependentSteps) {
  const auto clim = twelve_beliefs();
  std::vector<Observation> obs;
  std::vector<std::optional<GaussianBelief>> fusion;
  for (int t = 0; t < 12; ++t) {
    obs.push_back(Observation::of(0.12 + 0.005 * t));
    fusion.emplace_back(GaussianBelief{0.11 + 0.01 * t, 0.002});
  }
  const ObservationModel model(1.0, 0.0004);
  const auto steps = filter_series(clim, fusion, make_series(obs), model);
  for (std::size_t t = 0; t < 12; ++t) {
    const auto one = filter_step(clim[t], fusion[t], obs[t], model);
    EXPECT_EQ(steps[t].posterior, one.posterior);
    EXPECT_EQ(steps[t].gain, one.gain);
  }
}

TEST(FilterSeries, LengthMismatch) {
  const auto clim = twelve_beliefs();
  const std::vector<std::optional<GaussianBelief>> fusion(11);
  try {
    filter_series(clim, fusion, make_series(std::vector<Observation>(12)), {});
    FAIL() << "expected LengthMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
  }
}

TEST(FilterSeries, OutOfRangeIsCountedNotClamped) {
  const auto clim = twelve_beliefs();
  std::vector<Observation> obs(12, Observation::missing());
  obs[0] = Observation::of(1.15);
  const std::vector<std::optional<GaussianBelief>> fusion(12);
  const auto steps = filter_series(clim, fusion, make_series(obs), {1.0, 1e-8});
  EXPECT_GT(steps[0].posterior.mean(), 1.0);
  EXPECT_EQ(count_out_of_range(steps), 1u);
}
