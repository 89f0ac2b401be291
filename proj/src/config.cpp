// SPDX-License-Identifier: Apache-2.0
#include "jplink/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace jplink {
namespace {

std::string trim(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const int parsed = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key +
                                "' expects an integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const double parsed = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key +
                                "' expects a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument("config key '" + key +
                              "' expects true/false, got '" + value + "'");
}

unsigned long long parse_seed(const std::string& key,
                              const std::string& value) {
  try {
    size_t used = 0;
    const unsigned long long parsed = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key +
                                "' expects an unsigned integer, got '" + value +
                                "'");
  }
}

using Setter = std::function<void(ScenarioConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"cells", [](ScenarioConfig& c, const std::string& v) { c.cells = parse_int("cells", v); }},
      {"users_per_cell", [](ScenarioConfig& c, const std::string& v) { c.users_per_cell = parse_int("users_per_cell", v); }},
      {"nt", [](ScenarioConfig& c, const std::string& v) { c.nt = parse_int("nt", v); }},
      {"nr", [](ScenarioConfig& c, const std::string& v) { c.nr = parse_int("nr", v); }},
      {"streams_per_user", [](ScenarioConfig& c, const std::string& v) { c.streams_per_user = parse_int("streams_per_user", v); }},
      {"cluster_mode", [](ScenarioConfig& c, const std::string& v) { c.cluster_mode = v; }},
      {"snr_db", [](ScenarioConfig& c, const std::string& v) { c.snr_db = parse_double("snr_db", v); }},
      {"algorithm", [](ScenarioConfig& c, const std::string& v) { c.algorithm = v; }},
      {"alpha", [](ScenarioConfig& c, const std::string& v) { c.alpha = parse_double("alpha", v); }},
      {"rho", [](ScenarioConfig& c, const std::string& v) { c.rho = parse_double("rho", v); }},
      {"beta_dual", [](ScenarioConfig& c, const std::string& v) { c.beta_dual = parse_double("beta_dual", v); }},
      {"omega", [](ScenarioConfig& c, const std::string& v) { c.omega = parse_double("omega", v); }},
      {"normalize_step", [](ScenarioConfig& c, const std::string& v) { c.normalize_step = parse_bool("normalize_step", v); }},
      {"q_bits", [](ScenarioConfig& c, const std::string& v) { c.q_bits = parse_int("q_bits", v); }},
      {"smoothing_beta", [](ScenarioConfig& c, const std::string& v) { c.smoothing_beta = parse_double("smoothing_beta", v); }},
      {"gamma", [](ScenarioConfig& c, const std::string& v) { c.gamma = parse_double("gamma", v); }},
      {"bit", [](ScenarioConfig& c, const std::string& v) { c.bit = parse_int("bit", v); }},
      {"pilot_length", [](ScenarioConfig& c, const std::string& v) { c.pilot_length = parse_int("pilot_length", v); }},
      {"pilot_orthogonal", [](ScenarioConfig& c, const std::string& v) { c.pilot_orthogonal = parse_bool("pilot_orthogonal", v); }},
      {"pilot_noise_power", [](ScenarioConfig& c, const std::string& v) { c.pilot_noise_power = parse_double("pilot_noise_power", v); }},
      {"frames", [](ScenarioConfig& c, const std::string& v) { c.frames = parse_int("frames", v); }},
      {"iters_per_frame", [](ScenarioConfig& c, const std::string& v) { c.iters_per_frame = parse_int("iters_per_frame", v); }},
      {"reset_interval", [](ScenarioConfig& c, const std::string& v) { c.reset_interval = parse_int("reset_interval", v); }},
      {"bit_after_reset", [](ScenarioConfig& c, const std::string& v) { c.bit_after_reset = parse_int("bit_after_reset", v); }},
      {"delayed_indexing", [](ScenarioConfig& c, const std::string& v) { c.delayed_indexing = parse_bool("delayed_indexing", v); }},
      {"velocity_kmh", [](ScenarioConfig& c, const std::string& v) { c.velocity_kmh = parse_double("velocity_kmh", v); }},
      {"signaling_rate_ms", [](ScenarioConfig& c, const std::string& v) { c.signaling_rate_ms = parse_double("signaling_rate_ms", v); }},
      {"carrier_ghz", [](ScenarioConfig& c, const std::string& v) { c.carrier_ghz = parse_double("carrier_ghz", v); }},
      {"seed", [](ScenarioConfig& c, const std::string& v) { c.seed = parse_seed("seed", v); }},
      {"exchange", [](ScenarioConfig& c, const std::string& v) { c.exchange = v; }},
      {"sg_power_mode", [](ScenarioConfig& c, const std::string& v) { c.sg_power_mode = v; }},
      {"p_max", [](ScenarioConfig& c, const std::string& v) { c.p_max = parse_double("p_max", v); }},
  };
  return table;
}

}  // namespace

Algorithm parse_algorithm(const std::string& name) {
  if (name == "centralized") return Algorithm::centralized;
  if (name == "br") return Algorithm::br;
  if (name == "admm") return Algorithm::admm;
  if (name == "sg") return Algorithm::sg;
  if (name == "de_br") return Algorithm::de_br;
  if (name == "de_admm") return Algorithm::de_admm;
  if (name == "de_sg") return Algorithm::de_sg;
  throw std::invalid_argument(
      "unknown algorithm '" + name +
      "' (valid: centralized, br, admm, sg, de_br, de_admm, de_sg)");
}

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::centralized: return "centralized";
    case Algorithm::br: return "br";
    case Algorithm::admm: return "admm";
    case Algorithm::sg: return "sg";
    case Algorithm::de_br: return "de_br";
    case Algorithm::de_admm: return "de_admm";
    case Algorithm::de_sg: return "de_sg";
  }
  throw std::logic_error("unhandled algorithm enum");
}

void ScenarioConfig::validate() const {
  const Algorithm alg = parse_algorithm(algorithm);
  if (cluster_mode != "full_cooperation" && cluster_mode != "per_cell")
    throw std::invalid_argument(
        "cluster_mode must be 'full_cooperation' or 'per_cell'");
  if (exchange != "backhaul_offload" && exchange != "feedback_channel" &&
      exchange != "global_csi")
    throw std::invalid_argument(
        "exchange must be 'backhaul_offload', 'feedback_channel' or "
        "'global_csi'");
  if (sg_power_mode != "dual" && sg_power_mode != "projection")
    throw std::invalid_argument("sg_power_mode must be 'dual' or 'projection'");
  if (cells != 1 && cells != 7)
    throw std::invalid_argument("cells must be 1 or 7");
  if (users_per_cell < 1 || nt < 1 || nr < 1 || streams_per_user < 1)
    throw std::invalid_argument("network dimensions must be >= 1");
  if (!std::isfinite(snr_db))
    throw std::invalid_argument("snr_db must be finite");
  if (p_max <= 0.0) throw std::invalid_argument("p_max must be positive");
  if (rho <= 0.0) throw std::invalid_argument("rho must be positive");
  if (omega < 0.0) throw std::invalid_argument("omega must be >= 0");
  if (gamma < 0.0 || gamma >= 1.0)
    throw std::invalid_argument("gamma must lie in [0, 1)");
  if (bit < 1) throw std::invalid_argument("bit must be >= 1");
  if (q_bits < 0) throw std::invalid_argument("q_bits must be >= 0");
  if (smoothing_beta <= 0.0 || smoothing_beta > 1.0)
    throw std::invalid_argument("smoothing_beta must lie in (0, 1]");
  if (frames < 1) throw std::invalid_argument("frames must be >= 1");
  if (iters_per_frame < 0 || bit_after_reset < 0 || reset_interval < 0)
    throw std::invalid_argument("frame schedule values must be >= 0");
  if (pilot_length < 0) throw std::invalid_argument("pilot_length must be >= 0");
  if (pilot_noise_power < 0.0)
    throw std::invalid_argument("pilot_noise_power must be >= 0");
  const bool pilot_based = alg == Algorithm::de_br ||
                           alg == Algorithm::de_admm || alg == Algorithm::de_sg;
  if (pilot_based && pilot_orthogonal && pilot_length > 0 &&
      pilot_length < total_streams())
    throw std::invalid_argument(
        "orthogonal pilots need pilot_length >= total stream count (" +
        std::to_string(total_streams()) + "), got " +
        std::to_string(pilot_length));
  if (velocity_kmh < 0.0 || signaling_rate_ms <= 0.0 || carrier_ghz <= 0.0)
    throw std::invalid_argument("mobility parameters out of range");
}

double ScenarioConfig::resolved_alpha() const {
  if (alpha > 0.0) return alpha;
  switch (parse_algorithm(algorithm)) {
    case Algorithm::sg:
    case Algorithm::de_sg:
      return 1e-2;
    default:
      return 0.5;
  }
}

double ScenarioConfig::resolved_beta_dual() const {
  if (beta_dual > 0.0) return beta_dual;
  switch (parse_algorithm(algorithm)) {
    case Algorithm::sg:
    case Algorithm::de_sg:
      return 1e-2;
    case Algorithm::de_admm:
      return 1.0 / rho;
    default:
      return 1.0;
  }
}

ScenarioConfig parse_config(std::istream& in) {
  ScenarioConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key=value, got '" + stripped +
                                  "'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end())
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": unknown key '" + key + "'");
    it->second(config, value);
  }
  config.validate();
  return config;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("cannot open config file '" + path + "'");
  return parse_config(in);
}

void set_config_key(ScenarioConfig& config, const std::string& key,
                    const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end())
    throw std::invalid_argument("unknown config key '" + key + "'");
  it->second(config, value);
}

std::string format_config(const ScenarioConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "cells = " << c.cells << '\n'
      << "users_per_cell = " << c.users_per_cell << '\n'
      << "nt = " << c.nt << '\n'
      << "nr = " << c.nr << '\n'
      << "streams_per_user = " << c.streams_per_user << '\n'
      << "cluster_mode = " << c.cluster_mode << '\n'
      << "snr_db = " << c.snr_db << '\n'
      << "algorithm = " << c.algorithm << '\n'
      << "alpha = " << c.alpha << '\n'
      << "rho = " << c.rho << '\n'
      << "beta_dual = " << c.beta_dual << '\n'
      << "omega = " << c.omega << '\n'
      << "normalize_step = " << (c.normalize_step ? "true" : "false") << '\n'
      << "q_bits = " << c.q_bits << '\n'
      << "smoothing_beta = " << c.smoothing_beta << '\n'
      << "gamma = " << c.gamma << '\n'
      << "bit = " << c.bit << '\n'
      << "pilot_length = " << c.pilot_length << '\n'
      << "pilot_orthogonal = " << (c.pilot_orthogonal ? "true" : "false")
      << '\n'
      << "pilot_noise_power = " << c.pilot_noise_power << '\n'
      << "frames = " << c.frames << '\n'
      << "iters_per_frame = " << c.iters_per_frame << '\n'
      << "reset_interval = " << c.reset_interval << '\n'
      << "bit_after_reset = " << c.bit_after_reset << '\n'
      << "delayed_indexing = " << (c.delayed_indexing ? "true" : "false")
      << '\n'
      << "velocity_kmh = " << c.velocity_kmh << '\n'
      << "signaling_rate_ms = " << c.signaling_rate_ms << '\n'
      << "carrier_ghz = " << c.carrier_ghz << '\n'
      << "seed = " << c.seed << '\n'
      << "exchange = " << c.exchange << '\n'
      << "sg_power_mode = " << c.sg_power_mode << '\n'
      << "p_max = " << c.p_max << '\n';
  return out.str();
}

double derive_doppler(double velocity_kmh, double carrier_ghz,
                      double signaling_rate_ms) {
  constexpr double kSpeedOfLight = 299792458.0;
  const double speed = velocity_kmh / 3.6;  // m/s
  const double doppler = speed * carrier_ghz * 1e9 / kSpeedOfLight;  // Hz
  return doppler * signaling_rate_ms * 1e-3;
}

}  // namespace jplink
