// SPDX-License-Identifier: Apache-2.0
/**
 * @file jplink_main.cpp
 * @brief Command-line front end: single scenario runs and parameter sweeps.
 */
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "jplink/config.hpp"
#include "jplink/scenario.hpp"

namespace {

std::vector<std::string> split_csv_list(const std::string& joined) {
  std::vector<std::string> values;
  std::stringstream stream(joined);
  std::string item;
  while (std::getline(stream, item, ','))
    if (!item.empty()) values.push_back(item);
  return values;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jplink: joint-transmission beamforming simulator"};
  app.require_subcommand(1);

  std::string run_config_path;
  std::string run_out = "metrics.csv";
  long long run_seed = -1;
  CLI::App* run = app.add_subcommand("run", "Run one scenario and write a CSV trace");
  run->add_option("--config", run_config_path, "Scenario config file")->required();
  run->add_option("--seed", run_seed, "Override the config seed");
  run->add_option("--out", run_out, "Output CSV path");

  std::string sweep_config_path;
  std::string sweep_axis;
  std::string sweep_values;
  int sweep_seeds = 1;
  std::string sweep_out_dir = ".";
  CLI::App* sweep =
      app.add_subcommand("sweep", "Sweep one config key over several values");
  sweep->add_option("--config", sweep_config_path, "Base scenario config file")
      ->required();
  sweep->add_option("--axis", sweep_axis, "Config key to sweep")->required();
  sweep->add_option("--values", sweep_values, "Comma-separated axis values")
      ->required();
  sweep->add_option("--seeds", sweep_seeds, "Seeds per value (base seed, +1, ...)");
  sweep->add_option("--out-dir", sweep_out_dir, "Directory for per-value CSVs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      jplink::ScenarioConfig config = jplink::load_config(run_config_path);
      if (run_seed >= 0)
        config.seed = static_cast<unsigned long long>(run_seed);
      const jplink::RunResult result = jplink::run_scenario(config);
      jplink::write_csv_file(result.rows, run_out);
      std::cout << result.summary << '\n';
      if (result.failed) {
        std::cerr << "error: " << result.error << '\n';
        return 1;
      }
      return 0;
    }
    const jplink::ScenarioConfig base = jplink::load_config(sweep_config_path);
    const std::vector<std::string> values = split_csv_list(sweep_values);
    const jplink::SweepResult result =
        jplink::run_sweep(base, sweep_axis, values, sweep_seeds, sweep_out_dir);
    std::cout << result.summary_table;
    if (result.failed) {
      std::cerr << "error: one or more sweep cells failed\n";
      return 1;
    }
    return 0;
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << '\n';
    return 1;
  }
}
