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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any selected criterion fails.
//
//   acceptance          run criteria 1..8
//   acceptance 3 5      run only criteria 3 and 5

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oifuse/core_model.hpp"
#include "oifuse/evaluate.hpp"
#include "oifuse/fusion.hpp"
#include "oifuse/grid_io.hpp"
#include "oifuse/pipeline.hpp"
#include "support/cli_runner.hpp"
#include "support/grid_bayes.hpp"
#include "support/loo_oracle.hpp"
#include "support/temp_dir.hpp"

using namespace oifuse;
using oifuse::testing::Factor;
using oifuse::testing::run_cli;
using oifuse::testing::TempDir;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string quoted(const fs::path& p) { return "'" + p.string() + "'"; }

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  return out;
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(split(line, ','));
  }
  return rows;
}

// Runs the five commands on a fresh workspace. Returns the evaluate stdout,
// or an error description prefixed with "!".
std::string run_pipeline(const fs::path& ws, const fs::path& scratch, const std::string& config,
                         unsigned threads) {
  fs::create_directories(scratch);
  const fs::path cfg = scratch / "config.json";
  write_text(cfg, config);
  const std::string t = " --threads " + std::to_string(threads);
  auto r = run_cli("simulate --config " + quoted(cfg) + " --out " + quoted(ws) + t, scratch);
  if (r.exit_code != 0) return "!simulate exited " + std::to_string(r.exit_code) + ": " + r.err;
  for (const char* cmd : {"build-climatology", "fit-fusion", "filter", "evaluate"}) {
    r = run_cli(std::string(cmd) + " --out " + quoted(ws) + t, scratch);
    if (r.exit_code != 0) {
      return std::string("!") + cmd + " exited " + std::to_string(r.exit_code) + ": " + r.err;
    }
  }
  return r.out;
}

// The default 100 x 100 site run once with four workers, shared by several
// criteria.
struct DefaultRun {
  TempDir dir;
  std::string stdout_text;
  double seconds = 0.0;
};

DefaultRun& default_run() {
  static std::unique_ptr<DefaultRun> run;
  if (!run) {
    run = std::make_unique<DefaultRun>();
    const auto t0 = Clock::now();
    run->stdout_text = run_pipeline(run->dir / "ws", run->dir / "scratch", "{}", 4);
    run->seconds = seconds_since(t0);
  }
  return *run;
}

// --- 1 -------------------------------------------------------------------

Outcome filter_matches_numerical_bayes() {
  constexpr int kTuples = 1000;
  struct Case {
    GaussianBelief clim, fusion;
    Observation y;
    ObservationModel obs;
    std::vector<Factor> factors;
  };
  std::mt19937_64 rng(20260417);
  std::uniform_real_distribution<double> mean(-0.2, 1.2);
  std::uniform_real_distribution<double> log_var(std::log(1e-4), std::log(1e-1));
  std::uniform_real_distribution<double> log_r(std::log(1e-5), std::log(1e-2));
  std::uniform_real_distribution<double> h(0.5, 1.5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Case> cases;
  for (int i = 0; i < kTuples; ++i) {
    Case c{{mean(rng), std::exp(log_var(rng))},
           {mean(rng), std::exp(log_var(rng))},
           Observation::missing(),
           {h(rng), std::exp(log_r(rng))},
           {}};
    const bool observed = u(rng) < 0.9;
    const double y = mean(rng);
    c.factors = {{1.0, c.clim.mean(), c.clim.variance()}, {1.0, c.fusion.mean(), c.fusion.variance()}};
    if (observed) {
      c.y = Observation::of(y);
      c.factors.push_back({c.obs.h(), y, c.obs.r()});
    }
    cases.push_back(std::move(c));
  }

  const auto t0 = Clock::now();
  std::vector<double> dmean(cases.size());
  std::vector<double> dvar(cases.size());
  const unsigned workers = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < cases.size(); i += workers) {
        const Case& c = cases[i];
        const auto step = filter_step(c.clim, c.fusion, c.y, c.obs);
        const auto ref = oifuse::testing::posterior(c.factors, 1'000'000);
        dmean[i] = std::abs(step.posterior.mean() - ref.mean);
        dvar[i] = std::abs(step.posterior.variance() - ref.variance) / ref.variance;
      }
    });
  }
  for (auto& t : pool) t.join();
  const double secs = seconds_since(t0);

  const double worst_mean = *std::max_element(dmean.begin(), dmean.end());
  const double worst_var = *std::max_element(dvar.begin(), dvar.end());
  const bool pass = worst_mean <= 1e-6 && worst_var <= 1e-6 && secs < 30.0;
  return {pass, std::to_string(kTuples) + " tuples, max |d mean| " + fmt("%.2e", worst_mean) +
                    ", max rel d var " + fmt("%.2e", worst_var) + ", " + fmt("%.1f", secs) +
                    " s (limit 30 s)"};
}

// --- 2 -------------------------------------------------------------------

Outcome precision_additivity_and_symmetry() {
  constexpr int kPairs = 10000;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> mean(-0.5, 1.5);
  std::uniform_real_distribution<double> log_var(std::log(1e-6), std::log(1.0));
  const auto t0 = Clock::now();
  double worst_add = 0.0;
  double worst_sym = 0.0;
  for (int i = 0; i < kPairs; ++i) {
    const GaussianBelief a(mean(rng), std::exp(log_var(rng)));
    const GaussianBelief b(mean(rng), std::exp(log_var(rng)));
    const auto ab = predict(a, b);
    const auto ba = predict(b, a);
    const double precision = 1.0 / a.variance() + 1.0 / b.variance();
    worst_add = std::max(worst_add, std::abs(1.0 / ab.variance() - precision) / precision);
    const double scale = std::max(1.0, std::abs(ab.mean()));
    worst_sym = std::max({worst_sym, std::abs(ab.mean() - ba.mean()) / scale,
                          std::abs(ab.variance() - ba.variance()) / ab.variance()});
  }
  const double secs = seconds_since(t0);
  const bool pass = worst_add <= 1e-12 && worst_sym <= 1e-12 && secs < 5.0;
  return {pass, std::to_string(kPairs) + " pairs, max rel additivity error " +
                    fmt("%.2e", worst_add) + ", max symmetry error " + fmt("%.2e", worst_sym) +
                    ", " + fmt("%.3f", secs) + " s (limit 5 s)"};
}

// --- 3 -------------------------------------------------------------------

Outcome gap_months_inflate_variance() {
  TempDir dir;
  const std::string out = run_pipeline(dir / "ws", dir / "scratch",
                                       R"({"simulate": {"forced_gap_months": [3, 4]}})", 4);
  if (!out.empty() && out[0] == '!') return {false, out.substr(1)};
  const auto rows = read_filtered_csv(dir / "ws" / "filter" / "filtered.csv");

  // Rows come per band, per pixel, January..December.
  std::size_t pixels = 0;
  std::size_t good = 0;
  std::size_t compared = 0;
  std::size_t gap_observed = 0;
  std::map<std::string, std::size_t> bad_by_band;
  for (std::size_t i = 0; i + 12 <= rows.size(); i += 12) {
    const FilteredRow* r = &rows[i];
    ++pixels;
    bool ok = true;
    for (std::size_t gap : {2u, 3u}) {
      if (r[gap].observed) {
        ++gap_observed;
        ok = false;
        continue;
      }
      for (std::size_t nb : {1u, 4u}) {
        if (!r[nb].observed) continue;
        ++compared;
        if (!(r[gap].variance > r[nb].variance)) ok = false;
      }
    }
    good += ok ? 1 : 0;
    if (!ok) ++bad_by_band[r[0].band];
  }
  std::string per_band;
  for (const auto& [band, n] : bad_by_band) {
    per_band += ", " + band + " failing " + std::to_string(n);
  }
  const double pct = pixels ? 100.0 * static_cast<double>(good) / static_cast<double>(pixels) : 0.0;
  const bool pass = pixels > 0 && good == pixels && gap_observed == 0;
  return {pass, std::to_string(good) + "/" + std::to_string(pixels) + " pixel-bands (" +
                    fmt("%.2f", pct) + "%) with gap variance above every observed neighbour, " +
                    std::to_string(compared) + " comparisons" + per_band};
}

// --- 4 -------------------------------------------------------------------

Outcome filter_beats_baselines() {
  DefaultRun& run = default_run();
  if (!run.stdout_text.empty() && run.stdout_text[0] == '!') return {false, run.stdout_text.substr(1)};
  std::map<std::string, std::map<std::string, double>> rmse;
  for (const auto& row : read_csv_rows(run.dir / "ws" / "evaluate" / "skill.csv")) {
    if (row.size() != 4) return {false, "malformed skill.csv"};
    rmse[row[0]][row[1]] = parse_double(row[2]);
  }
  if (rmse.empty()) return {false, "skill.csv is empty"};
  bool pass = run.seconds < 60.0;
  std::string detail;
  for (auto& [band, m] : rmse) {
    const double f = m["filtered"];
    const double c = m["climatology"];
    const double u = m["fusion"];
    pass = pass && f < c && f < u;
    detail += band + " RMSE filtered " + fmt("%.5f", f) + " climatology " + fmt("%.5f", c) +
              " fusion " + fmt("%.5f", u) + "; ";
  }
  return {pass, detail + "pipeline " + fmt("%.1f", run.seconds) + " s with 4 threads (limit 60 s)"};
}

// --- 5 -------------------------------------------------------------------

std::vector<CollocatedPair> line_pairs(std::mt19937_64& rng, std::size_t n, double slope,
                                       double intercept, double sd) {
  std::uniform_real_distribution<double> coarse(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, sd);
  std::vector<CollocatedPair> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = coarse(rng);
    const double e = sd > 0.0 ? noise(rng) : 0.0;
    pairs.push_back({c, slope * c + intercept + e, static_cast<int>(i % 12)});
  }
  return pairs;
}

Outcome fusion_recovers_linear_map() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> slope(0.5, 1.5);
  std::uniform_real_distribution<double> icpt(-0.1, 0.1);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double a = slope(rng);
    const double b = icpt(rng);
    const auto m = fit_fusion_model(line_pairs(rng, 6 + static_cast<std::size_t>(i % 60), a, b, 0.0));
    if (m.degenerate) return {false, "noiseless fit reported degenerate"};
    worst = std::max({worst, std::abs(m.slope - a), std::abs(m.intercept - b)});
  }

  constexpr int kSeeds = 1000;
  int slope_in = 0;
  int icpt_in = 0;
  int var_in = 0;
  for (int s = 0; s < kSeeds; ++s) {
    std::mt19937_64 r(static_cast<std::uint64_t>(s));
    const auto m = fit_fusion_model(line_pairs(r, 100, 0.8, 0.05, 0.02));
    slope_in += m.slope >= 0.75 && m.slope <= 0.85;
    icpt_in += m.intercept >= 0.03 && m.intercept <= 0.07;
    var_in += m.residual_variance >= 0.0002 && m.residual_variance <= 0.0006;
  }
  const bool pass = worst <= 1e-6 && slope_in >= 999 && icpt_in >= 999 && var_in >= 990;
  return {pass, "noiseless max error " + fmt("%.2e", worst) + "; noisy 100-pair fits in band: slope " +
                    std::to_string(slope_in) + "/1000, intercept " + std::to_string(icpt_in) +
                    "/1000, residual variance " + std::to_string(var_in) + "/1000"};
}

// --- 6 -------------------------------------------------------------------

struct SmallRun {
  TempDir dir;
  std::string error;
};

SmallRun& small_run() {
  static std::unique_ptr<SmallRun> run;
  if (!run) {
    run = std::make_unique<SmallRun>();
    const std::string out =
        run_pipeline(run->dir / "ws", run->dir / "scratch",
                     R"({"simulate": {"width": 10, "height": 10, "coarse_block": 5, "seed": 11}})", 3);
    if (!out.empty() && out[0] == '!') run->error = out.substr(1);
  }
  return *run;
}

Outcome loocv_matches_by_hand() {
  SmallRun& run = small_run();
  if (!run.error.empty()) return {false, run.error};
  const auto cfg = RunConfig::from_file(run.dir / "ws" / kWorkspaceConfig);
  std::map<std::pair<std::string, std::string>, double> reported;
  for (const auto& row : read_csv_rows(run.dir / "ws" / "evaluate" / "metrics.csv")) {
    reported[{row[0], row[1]}] = parse_double(row[3]);
  }
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto& band : cfg.bands) {
    const auto in = assemble_band(cfg, band);
    for (const auto& site : cfg.sites) {
      std::vector<PixelInputs> pixels;
      for (std::size_t p : site.pixels(in.geometry.width)) pixels.push_back(in.pixels[p]);
      const auto totals = oifuse::testing::loo_totals_by_hand(pixels, in.obs);
      const auto it = reported.find({site.label, band.name});
      if (it == reported.end()) return {false, "metrics.csv lacks " + site.label + "/" + band.name};
      worst = std::max(worst, std::abs(it->second - totals.rmse()));
      ++checked;
    }
  }
  const bool pass = checked == reported.size() && checked > 0 && worst <= 1e-12;
  return {pass, std::to_string(checked) + " site-band RMSEs from the CLI vs by-hand LOOCV, max |diff| " +
                    fmt("%.2e", worst)};
}

// --- 7 -------------------------------------------------------------------

std::string check_report(const fs::path& eval_dir, std::size_t& rows_checked) {
  for (const auto& row : read_csv_rows(eval_dir / "metrics.csv")) {
    if (row.size() != 7) return "malformed metrics.csv row";
    const double me = parse_double(row[2]);
    const double rmse = parse_double(row[3]);
    const double mae = parse_double(row[4]);
    if (!(rmse >= mae && mae >= std::abs(me))) {
      return "ordering violated for " + row[0] + "/" + row[1];
    }
    ++rows_checked;
  }
  std::istringstream table(oifuse::testing::read_file(eval_dir / "table.txt"));
  std::vector<std::string> lines;
  for (std::string l; std::getline(table, l);) lines.push_back(l);
  if (lines.size() != 17) return "table has " + std::to_string(lines.size()) + " lines, expected 17";
  for (const char* col : {"ME", "RMSE", "MAE", "Mean rho"}) {
    if (lines[1].find(col) == std::string::npos) return std::string("table header lacks ") + col;
  }
  if (lines[3] != "Band 3" || lines[10] != "Band 4") return "band blocks out of place";
  for (std::size_t block : {4u, 11u}) {
    for (std::size_t i = 0; i < 5; ++i) {
      std::istringstream row(lines[block + i]);
      std::string label;
      double v[4];
      if (!(row >> label >> v[0] >> v[1] >> v[2] >> v[3])) return "unparsable table row: " + lines[block + i];
    }
  }
  return "";
}

Outcome metric_ordering_and_table() {
  std::size_t rows = 0;
  std::size_t reports = 0;
  DefaultRun& big = default_run();
  if (!big.stdout_text.empty() && big.stdout_text[0] == '!') return {false, big.stdout_text.substr(1)};
  SmallRun& small = small_run();
  if (!small.error.empty()) return {false, small.error};
  for (const fs::path& eval : {big.dir / "ws" / "evaluate", small.dir / "ws" / "evaluate"}) {
    const std::string err = check_report(eval, rows);
    if (!err.empty()) return {false, err};
    ++reports;
  }
  if (big.stdout_text != oifuse::testing::read_file(big.dir / "ws" / "evaluate" / "table.txt")) {
    return {false, "printed table differs from table.txt"};
  }
  return {rows > 0, "RMSE >= MAE >= |ME| on " + std::to_string(rows) + " rows of " +
                        std::to_string(reports) +
                        " reports; tables have two band blocks of five sites and four metric columns"};
}

// --- 8 -------------------------------------------------------------------

Outcome cli_is_deterministic() {
  DefaultRun& base = default_run();
  if (!base.stdout_text.empty() && base.stdout_text[0] == '!') return {false, base.stdout_text.substr(1)};
  const auto reference = oifuse::testing::snapshot(base.dir / "ws");
  std::string detail;
  bool pass = !reference.empty();
  for (unsigned threads : {4u, 1u, 7u}) {
    TempDir dir;
    const std::string out = run_pipeline(dir / "ws", dir / "scratch", "{}", threads);
    if (!out.empty() && out[0] == '!') return {false, out.substr(1)};
    const auto snap = oifuse::testing::snapshot(dir / "ws");
    std::size_t differing = 0;
    std::set<std::string> names;
    for (const auto& [k, v] : reference) names.insert(k);
    for (const auto& [k, v] : snap) names.insert(k);
    for (const auto& n : names) {
      const auto a = reference.find(n);
      const auto b = snap.find(n);
      if (a == reference.end() || b == snap.end() || a->second != b->second) ++differing;
    }
    const bool same = differing == 0 && out == base.stdout_text;
    pass = pass && same;
    detail += std::to_string(threads) + " thread" + (threads == 1 ? "" : "s") + ": " +
              (same ? "identical" : std::to_string(differing) + " files differ") + "; ";
  }
  return {pass, std::to_string(reference.size()) + " output files compared against the 4-thread run; " +
                    detail.substr(0, detail.size() - 2)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"filter matches numerical Bayes", filter_matches_numerical_bayes},
      {"precision additivity and symmetry", precision_additivity_and_symmetry},
      {"gap months carry larger variance", gap_months_inflate_variance},
      {"filter beats climatology and fusion", filter_beats_baselines},
      {"fusion recovers the linear map", fusion_recovers_linear_map},
      {"LOOCV matches by-hand folds", loocv_matches_by_hand},
      {"metric ordering and table layout", metric_ordering_and_table},
      {"CLI output is deterministic", cli_is_deterministic},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n < 1 || n > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "unknown criterion: %s\n", argv[i]);
      return 2;
    }
    selected.insert(n);
  }
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(n)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", n, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
