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

// oifuse: optimal-interpolation fusion of coarse and fine reflectance series.
//
//   oifuse simulate          --out <dir> [--seed N]
//   oifuse build-climatology --out <dir>
//   oifuse fit-fusion        --out <dir>
//   oifuse filter            --out <dir>
//   oifuse evaluate          --out <dir>
//
// Common flags: --config <path>, --threads <n>, --band <name> (repeatable).
// Without --config, <out>/oifuse.json is used when present. Flags override
// the config file. Exit codes: 0 success, 1 internal error, 2 invalid input.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "oifuse/error.hpp"
#include "oifuse/pipeline.hpp"

namespace {

namespace fs = std::filesystem;

struct Flags {
  std::string config;
  std::string out;
  std::optional<unsigned> threads;
  std::vector<std::string> bands;
  std::optional<std::uint64_t> seed;
};

void report_error(std::string_view kind, const std::string& message) {
  nlohmann::json j = {{"error", kind}, {"message", message}};
  std::cerr << j.dump() << '\n';
}

oifuse::RunConfig resolve_config(const Flags& flags, bool simulate) {
  oifuse::RunConfig cfg;
  if (!flags.config.empty()) {
    cfg = oifuse::RunConfig::from_file(flags.config);
  } else if (!simulate && !flags.out.empty() &&
             fs::exists(fs::path(flags.out) / oifuse::kWorkspaceConfig)) {
    cfg = oifuse::RunConfig::from_file(fs::path(flags.out) / oifuse::kWorkspaceConfig);
  }
  if (!flags.out.empty()) {
    cfg.out_dir = flags.out;
    if (cfg.input_dir.empty()) cfg.input_dir = flags.out;
  }
  if (cfg.out_dir.empty()) {
    throw oifuse::Error(oifuse::ErrorCode::ConfigInvalid, "no output directory (use --out)");
  }
  if (cfg.input_dir.empty()) cfg.input_dir = cfg.out_dir;
  if (flags.threads) cfg.threads = *flags.threads;
  if (flags.seed) cfg.simulate.seed = *flags.seed;
  if (!flags.bands.empty()) {
    std::vector<oifuse::BandSettings> chosen;
    for (const auto& name : flags.bands) {
      auto it = std::find_if(cfg.bands.begin(), cfg.bands.end(),
                             [&](const oifuse::BandSettings& b) { return b.name == name; });
      chosen.push_back(it != cfg.bands.end() ? *it : oifuse::BandSettings{name});
    }
    cfg.bands = std::move(chosen);
    if (simulate) {
      std::vector<oifuse::SyntheticBand> synth;
      for (const auto& name : flags.bands) {
        auto it = std::find_if(cfg.simulate.bands.begin(), cfg.simulate.bands.end(),
                               [&](const oifuse::SyntheticBand& b) { return b.name == name; });
        if (it == cfg.simulate.bands.end()) {
          throw oifuse::Error(oifuse::ErrorCode::ConfigInvalid,
                              "simulate has no band named " + name);
        }
        synth.push_back(*it);
      }
      cfg.simulate.bands = std::move(synth);
    }
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal-interpolation fusion of coarse and fine reflectance time series"};
  app.require_subcommand(1);
  Flags flags;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "Workspace / output directory");
    sub->add_option("--threads", flags.threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--band", flags.bands, "Band to process (repeatable)");
  };

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic site with known truth");
  add_common(simulate);
  simulate->add_option("--seed", flags.seed, "Random seed");
  auto* climatology = app.add_subcommand("build-climatology", "Monthly median climatology");
  add_common(climatology);
  auto* fusion = app.add_subcommand("fit-fusion", "Per-pixel coarse-to-fine regression");
  add_common(fusion);
  auto* filter = app.add_subcommand("filter", "Filtered, gap-free target-year series");
  add_common(filter);
  auto* evaluate = app.add_subcommand("evaluate", "Leave-one-out cross-validation report");
  add_common(evaluate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const bool is_sim = simulate->parsed();
    const oifuse::RunConfig cfg = resolve_config(flags, is_sim);
    if (is_sim) {
      oifuse::cmd_simulate(cfg);
    } else if (climatology->parsed()) {
      oifuse::cmd_build_climatology(cfg);
    } else if (fusion->parsed()) {
      oifuse::cmd_fit_fusion(cfg);
    } else if (filter->parsed()) {
      oifuse::cmd_filter(cfg);
    } else if (evaluate->parsed()) {
      oifuse::cmd_evaluate(cfg);
    }
  } catch (const oifuse::Error& e) {
    report_error(oifuse::to_string(e.code()), e.what());
    return 2;
  } catch (const std::exception& e) {
    report_error("Internal", e.what());
    return 1;
  }
  return 0;
}
