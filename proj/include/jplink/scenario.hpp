// SPDX-License-Identifier: Apache-2.0
/**
 * @file scenario.hpp
 * @brief Framed scenario orchestration, CSV metric emission, parameter sweeps.
 *
 * A scenario runs the configured algorithm over a sequence of fading frames.
 * Each frame gets a training-iteration budget from the admission policy (more
 * right after a beam reset), weights are refreshed at frame boundaries, drop
 * detection runs at frame end, and one metrics row is emitted per (frame,
 * inner iteration).
 */
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "jplink/config.hpp"

namespace jplink {

/// One line of the metrics stream.  Field order equals CSV column order.
struct MetricsRow {
  int frame = 0;
  int inner_iteration = 0;
  std::string algorithm;
  unsigned long long seed = 0;
  double sum_rate = 0.0;        ///< weighted sum rate of the active data beams
  double effective_rate = 0.0;  ///< (1 - gamma) * sum_rate
  std::vector<double> per_bs_power;  ///< active-set power per station
  double consensus_residual = 0.0;
  double gradient_norm = 0.0;
  int active_streams = 0;
  long long backhaul_scalars = 0;  ///< cumulative exchanged complex scalars
  long long quantizer_saturation_events = 0;  ///< during this iteration
};

std::string csv_header();
std::string csv_row(const MetricsRow& row);
void write_csv(const std::vector<MetricsRow>& rows, std::ostream& out);
void write_csv_file(const std::vector<MetricsRow>& rows,
                    const std::string& path);

struct RunResult {
  std::vector<MetricsRow> rows;
  std::string summary;  ///< one line for standard output
  bool failed = false;
  std::string error;    ///< diagnostic with frame index when failed
};

/// Run one scenario.  Deterministic given config.seed; solver failures stop
/// the frame loop and are carried into the summary instead of thrown.
RunResult run_scenario(const ScenarioConfig& config);

struct SweepEntry {
  std::string value;
  int seeds_ok = 0;
  int seeds_failed = 0;
  double mean_final_sum_rate = 0.0;  ///< over successful seeds
  std::string first_error;
};

struct SweepResult {
  std::vector<std::string> files;  ///< one CSV per axis value
  std::vector<SweepEntry> entries;
  std::string summary_table;       ///< printable seed-averaged final rates
  bool failed = false;             ///< any cell failed
};

/// Cross-product sweep over one config key.  Each value runs `seeds` cells
/// with seeds base.seed, base.seed+1, ...; cells run concurrently and errors
/// are recorded per cell while the sweep continues.
SweepResult run_sweep(const ScenarioConfig& base, const std::string& axis,
                      const std::vector<std::string>& values, int seeds,
                      const std::string& out_dir = ".");

}  // namespace jplink
