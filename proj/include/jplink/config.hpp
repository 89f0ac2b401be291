// SPDX-License-Identifier: Apache-2.0
/**
 * @file config.hpp
 * @brief Scenario configuration: flat key=value files and derived quantities.
 */
#pragma once

#include <iosfwd>
#include <string>

namespace jplink {

/// Solver selection.  The de_* variants run on pilot-domain training
/// observations instead of explicitly exchanged link signals.
enum class Algorithm {
  centralized,
  br,
  admm,
  sg,
  de_br,
  de_admm,
  de_sg,
};

Algorithm parse_algorithm(const std::string& name);
std::string to_string(Algorithm algorithm);

/// Full description of one simulation scenario.  Every field maps 1:1 to a
/// config-file key of the same name.  Step sizes alpha and beta_dual default
/// to -1, meaning "pick the per-algorithm default" (see resolved_alpha /
/// resolved_beta_dual).
struct ScenarioConfig {
  // Network layout.
  int cells = 7;
  int users_per_cell = 7;
  int nt = 4;                ///< transmit antennas per station
  int nr = 2;                ///< receive antennas per user
  int streams_per_user = 1;
  std::string cluster_mode = "full_cooperation";  ///< or "per_cell"
  double snr_db = 20.0;      ///< cell-edge SNR defining the noise power

  // Algorithm.
  std::string algorithm = "centralized";
  double alpha = -1.0;       ///< update step (best response / gradient)
  double rho = 3.0;          ///< consensus penalty
  double beta_dual = -1.0;   ///< dual step (consensus / power dual)
  double omega = 0.5;        ///< gradient momentum factor; 0 disables momentum
  bool normalize_step = true;
  int q_bits = 0;            ///< bits per quantizer branch; 0 = exact
  double smoothing_beta = 1.0;

  // Signaling frame and training.
  double gamma = 0.0;        ///< training overhead fraction; 0 disables
  int bit = 3;               ///< beamformer iterations per frame
  int pilot_length = 0;      ///< 0 = total stream count
  bool pilot_orthogonal = true;
  double pilot_noise_power = 0.0;

  // Scenario schedule.
  int frames = 1;
  int iters_per_frame = 0;   ///< 0 = use bit
  int reset_interval = 0;    ///< frames between beam resets; 0 = never
  int bit_after_reset = 0;   ///< 0 = use the normal per-frame count
  bool delayed_indexing = false;

  // Mobility.
  double velocity_kmh = 0.0;
  double signaling_rate_ms = 2.0;  ///< frame duration
  double carrier_ghz = 2.0;

  unsigned long long seed = 1;

  // Extensions beyond the core parameter table.
  std::string exchange = "backhaul_offload";  ///< accounting scheme
  std::string sg_power_mode = "dual";         ///< "dual" or "projection"
  double p_max = 1.0;        ///< per-station power budget

  /// Throws std::invalid_argument on out-of-range or inconsistent values.
  void validate() const;

  int total_streams() const { return cells * users_per_cell * streams_per_user; }
  int iters_for_normal_frame() const {
    return iters_per_frame > 0 ? iters_per_frame : bit;
  }
  int iters_for_reset_frame() const {
    return bit_after_reset > 0 ? bit_after_reset : iters_for_normal_frame();
  }
  /// alpha with per-algorithm default: 0.5 for best response, 1e-2 for
  /// gradient schemes, unused otherwise.
  double resolved_alpha() const;
  /// beta_dual with per-algorithm default: 1/rho for pilot-domain consensus,
  /// 1e-2 for gradient power duals, 1 otherwise.
  double resolved_beta_dual() const;
};

/// Parse a flat key=value config ('#' starts a comment, blank lines ignored).
/// Unknown keys and malformed values raise std::invalid_argument.
ScenarioConfig parse_config(std::istream& in);
ScenarioConfig load_config(const std::string& path);

/// Set one field by its config-file key (used by parameter sweeps).  Throws
/// std::invalid_argument on unknown keys or malformed values.
void set_config_key(ScenarioConfig& config, const std::string& key,
                    const std::string& value);

/// Serialize with one key=value line per field, in declaration order.
std::string format_config(const ScenarioConfig& config);

/// Normalized Doppler frequency (Doppler shift times frame duration) for a
/// terminal speed in km/h, carrier in GHz and frame duration in ms.
double derive_doppler(double velocity_kmh, double carrier_ghz,
                      double signaling_rate_ms);

}  // namespace jplink
