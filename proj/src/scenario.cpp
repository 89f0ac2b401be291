// SPDX-License-Identifier: Apache-2.0
#include "jplink/scenario.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "jplink/admission.hpp"
#include "jplink/fading.hpp"
#include "jplink/geometry.hpp"
#include "jplink/pilots.hpp"
#include "jplink/signaling.hpp"
#include "jplink/sse.hpp"
#include "jplink/system_model.hpp"
#include "jplink/wmmse.hpp"

namespace jplink {
namespace {

constexpr double kIsdM = 600.0;
constexpr double kPathlossExponent = 3.0;

std::string fmt_g(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.10g", value);
  return buffer;
}

ExchangeScheme parse_exchange(const std::string& name) {
  if (name == "backhaul_offload") return ExchangeScheme::backhaul_offload;
  if (name == "feedback_channel") return ExchangeScheme::feedback_channel;
  if (name == "global_csi") return ExchangeScheme::global_csi;
  throw std::invalid_argument("unknown exchange scheme '" + name + "'");
}

int count_active(const StreamState& state) {
  int n = 0;
  for (char a : state.active) n += a != 0;
  return n;
}

/// Uniform per-iteration interface over the three solver families.
class Engine {
 public:
  virtual ~Engine() = default;
  virtual void on_frame(const ChannelTensor& channels) { (void)channels; }
  virtual void step(const ChannelTensor& channels, bool refresh_weights) = 0;
  virtual const BeamformerSet& beams() const = 0;
  virtual const StreamState& state() const = 0;
  virtual double consensus_residual() const { return 0.0; }
  virtual double gradient_norm() const { return 0.0; }
  virtual long long ledger_scalars() const = 0;
  virtual long long take_saturation_delta() { return 0; }
  virtual void apply_active_flags(const std::vector<char>& active) = 0;
  virtual void reset(const ChannelTensor& channels) = 0;
  virtual void decay_quantizer_ranges() {}
};

/// Full-knowledge alternating optimization; the coordinator collects global
/// channel state once per frame, so that is what the ledger charges.
class CentralizedEngine : public Engine {
 public:
  CentralizedEngine(ClusterMap cluster, arma::vec p_max, arma::vec sigma2,
                    arma::vec mu, BeamformerSet init_beams, int nt, int nr)
      : cluster_(std::move(cluster)),
        sigma2_(std::move(sigma2)),
        mu_(std::move(mu)),
        beams_(std::move(init_beams)),
        nt_(nt),
        nr_(nr) {
    if (beams_.p_max.n_elem == 0) beams_.p_max = std::move(p_max);
    state_ = make_stream_state(cluster_, mu_, sigma2_);
    ledger_.scheme = ExchangeScheme::global_csi;
  }

  void on_frame(const ChannelTensor& channels) override {
    (void)channels;
    ledger_.add_round(account_exchange(ledger_.scheme, cluster_, nt_, nr_));
  }

  // The coordinator recomputes the rate-optimal weights locally on every
  // iteration (there is no exchange budget to respect), keeping the
  // monotone-ascent property of the alternating optimization.
  void step(const ChannelTensor& channels, bool refresh_weights) override {
    (void)refresh_weights;
    receivers_ = mmse_receiver(channels, beams_, cluster_, sigma2_, &state_);
    for (int s = 0; s < cluster_.total_streams(); ++s) {
      if (!state_.active[s]) continue;
      state_.epsilon(s) = compute_mse(channels, beams_, receivers_, cluster_,
                                      sigma2_(cluster_.user_of(s)), s);
    }
    state_ = update_weights(std::move(state_), mu_, cluster_);
    solve_transmit_subproblem(channels, beams_, receivers_, state_, cluster_);
  }

  const BeamformerSet& beams() const override { return beams_; }
  const StreamState& state() const override { return state_; }
  long long ledger_scalars() const override { return ledger_.scalars; }

  void apply_active_flags(const std::vector<char>& active) override {
    state_.active = active;
    for (int s = 0; s < cluster_.total_streams(); ++s)
      if (!state_.active[s]) beams_.m.slice(s).zeros();
    state_ = update_weights(std::move(state_), mu_, cluster_);
  }

  void reset(const ChannelTensor& channels) override {
    const arma::vec p_max = beams_.p_max;
    beams_ = matched_filter_init(channels, cluster_, p_max);
    state_ = make_stream_state(cluster_, mu_, sigma2_);
  }

 private:
  ClusterMap cluster_;
  arma::vec sigma2_, mu_;
  BeamformerSet beams_;
  ReceiverSet receivers_;
  StreamState state_;
  BackhaulLedger ledger_;
  int nt_, nr_;
};

class SseEngine : public Engine {
 public:
  SseEngine(ClusterMap cluster, arma::vec p_max, arma::vec sigma2, arma::vec mu,
            BeamformerSet init_beams, SseOptions options)
      : stepper_(std::move(cluster), std::move(p_max), std::move(sigma2),
                 std::move(mu), std::move(init_beams), options) {}

  void step(const ChannelTensor& channels, bool refresh_weights) override {
    stepper_.step(channels, refresh_weights);
  }
  const BeamformerSet& beams() const override { return stepper_.beams(); }
  const StreamState& state() const override { return stepper_.state(); }
  double consensus_residual() const override {
    return stepper_.consensus_residual();
  }
  double gradient_norm() const override { return stepper_.gradient_norm(); }
  long long ledger_scalars() const override { return stepper_.ledger().scalars; }
  long long take_saturation_delta() override {
    return stepper_.take_saturation_delta();
  }
  void apply_active_flags(const std::vector<char>& active) override {
    stepper_.apply_active_flags(active);
  }
  void reset(const ChannelTensor& channels) override { stepper_.reset(channels); }
  void decay_quantizer_ranges() override { stepper_.decay_quantizer_ranges(); }

 private:
  SseStepper stepper_;
};

class DeEngine : public Engine {
 public:
  DeEngine(ClusterMap cluster, arma::vec p_max, arma::vec sigma2, arma::vec mu,
           BeamformerSet init_beams, PilotBook book, DeOptions options,
           Rng noise_rng)
      : stepper_(std::move(cluster), std::move(p_max), std::move(sigma2),
                 std::move(mu), std::move(init_beams), std::move(book), options,
                 noise_rng) {}

  void step(const ChannelTensor& channels, bool refresh_weights) override {
    stepper_.step(channels, refresh_weights);
  }
  const BeamformerSet& beams() const override { return stepper_.beams(); }
  const StreamState& state() const override { return stepper_.state(); }
  double consensus_residual() const override {
    return stepper_.consensus_residual();
  }
  double gradient_norm() const override { return stepper_.gradient_norm(); }
  long long ledger_scalars() const override { return stepper_.ledger().scalars; }
  long long take_saturation_delta() override {
    return stepper_.take_saturation_delta();
  }
  void apply_active_flags(const std::vector<char>& active) override {
    stepper_.apply_active_flags(active);
  }
  void reset(const ChannelTensor& channels) override { stepper_.reset(channels); }
  void decay_quantizer_ranges() override { stepper_.decay_quantizer_ranges(); }

 private:
  DeStepper stepper_;
};

std::unique_ptr<Engine> make_engine(const ScenarioConfig& config,
                                    const ClusterMap& cluster,
                                    const arma::vec& p_max,
                                    const arma::vec& sigma2,
                                    const arma::vec& mu,
                                    BeamformerSet init_beams, Rng book_rng,
                                    Rng pilot_noise_rng) {
  const Algorithm alg = parse_algorithm(config.algorithm);
  switch (alg) {
    case Algorithm::centralized:
      return std::make_unique<CentralizedEngine>(cluster, p_max, sigma2, mu,
                                                 std::move(init_beams),
                                                 config.nt, config.nr);
    case Algorithm::br:
    case Algorithm::admm:
    case Algorithm::sg: {
      SseOptions options;
      options.algorithm = alg == Algorithm::br  ? SseAlgorithm::best_response
                          : alg == Algorithm::admm ? SseAlgorithm::admm
                                                   : SseAlgorithm::stochastic_gradient;
      options.exchange = parse_exchange(config.exchange);
      options.alpha = config.resolved_alpha();
      options.rho = config.rho;
      options.sg_alpha = config.resolved_alpha();
      options.sg_beta = config.resolved_beta_dual();
      options.omega = config.omega;
      options.normalize = config.normalize_step;
      options.momentum = config.omega > 0.0;
      options.power_mode = config.sg_power_mode == "projection"
                               ? SgPowerMode::projection
                               : SgPowerMode::dual;
      options.q_bits = config.q_bits;
      options.smoothing_beta = config.smoothing_beta;
      return std::make_unique<SseEngine>(cluster, p_max, sigma2, mu,
                                         std::move(init_beams), options);
    }
    case Algorithm::de_br:
    case Algorithm::de_admm:
    case Algorithm::de_sg: {
      DeOptions options;
      options.algorithm = alg == Algorithm::de_br ? DeAlgorithm::best_response
                          : alg == Algorithm::de_admm
                              ? DeAlgorithm::admm
                              : DeAlgorithm::stochastic_gradient;
      options.exchange = parse_exchange(config.exchange);
      options.alpha = config.resolved_alpha();
      options.rho = config.rho;
      options.beta_dual = config.resolved_beta_dual();
      options.sg_alpha = config.resolved_alpha();
      options.sg_beta = config.resolved_beta_dual();
      options.omega = config.omega;
      options.normalize = config.normalize_step;
      options.momentum = config.omega > 0.0;
      options.power_mode = config.sg_power_mode == "projection"
                               ? SgPowerMode::projection
                               : SgPowerMode::dual;
      options.pilot_noise_power = config.pilot_noise_power;
      options.q_bits = config.q_bits;
      options.smoothing_beta = config.smoothing_beta;
      const int length = config.pilot_length > 0 ? config.pilot_length
                                                 : cluster.total_streams();
      PilotBook book = make_pilot_book(length, cluster.total_streams(),
                                       config.pilot_orthogonal, book_rng);
      return std::make_unique<DeEngine>(cluster, p_max, sigma2, mu,
                                        std::move(init_beams), std::move(book),
                                        options, pilot_noise_rng);
    }
  }
  throw std::logic_error("unhandled algorithm enum");
}

std::string sanitize_for_filename(const std::string& value) {
  std::string out = value;
  for (char& c : out) {
    const bool ok = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
                    (c >= 'A' && c <= 'Z') || c == '.' || c == '-' || c == '_';
    if (!ok) c = '_';
  }
  return out;
}

}  // namespace

std::string csv_header() {
  return "frame,inner_iteration,algorithm,seed,sum_rate,effective_rate,"
         "per_bs_power,consensus_residual,gradient_norm,active_streams,"
         "backhaul_scalars,quantizer_saturation_events";
}

std::string csv_row(const MetricsRow& row) {
  std::ostringstream out;
  out << row.frame << ',' << row.inner_iteration << ',' << row.algorithm << ','
      << row.seed << ',' << fmt_g(row.sum_rate) << ','
      << fmt_g(row.effective_rate) << ',';
  for (size_t b = 0; b < row.per_bs_power.size(); ++b) {
    if (b) out << ';';
    out << fmt_g(row.per_bs_power[b]);
  }
  out << ',' << fmt_g(row.consensus_residual) << ','
      << fmt_g(row.gradient_norm) << ',' << row.active_streams << ','
      << row.backhaul_scalars << ',' << row.quantizer_saturation_events;
  return out.str();
}

void write_csv(const std::vector<MetricsRow>& rows, std::ostream& out) {
  out << csv_header() << '\n';
  for (const MetricsRow& row : rows) out << csv_row(row) << '\n';
}

void write_csv_file(const std::vector<MetricsRow>& rows,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file '" + path + "'");
  write_csv(rows, out);
}

RunResult run_scenario(const ScenarioConfig& config) {
  RunResult result;
  config.validate();
  const Layout layout = build_wraparound_layout(
      config.cells, config.users_per_cell, kIsdM, kPathlossExponent);
  const ClusterMap cluster =
      config.cluster_mode == "per_cell"
          ? make_per_cell(config.cells, config.users_per_cell,
                          config.streams_per_user)
          : make_full_cooperation(config.cells, layout.users(),
                                  config.streams_per_user);
  const arma::mat gains = path_gain_matrix(layout);
  const double snr_linear = std::pow(10.0, config.snr_db / 10.0);
  const double edge_gain =
      path_gain(layout.isd_m / 2.0, layout.pathloss_exponent);
  const double sigma2_value = noise_power(snr_linear, config.p_max, edge_gain);
  const arma::vec sigma2(layout.users(), arma::fill::value(sigma2_value));
  const arma::vec mu(layout.users(), arma::fill::ones);
  const arma::vec p_max(config.cells, arma::fill::value(config.p_max));

  const Rng base(config.seed);
  const double doppler = derive_doppler(
      config.velocity_kmh, config.carrier_ghz, config.signaling_rate_ms);
  const FadingProcess fading(config.cells, layout.users(), config.nr,
                             config.nt, doppler, gains, base.derive(1));

  const FrameSchedule schedule = build_schedule(config.gamma, config.bit);
  AdmissionPolicy policy;
  policy.reset_interval = config.reset_interval;
  policy.bit_normal = config.iters_for_normal_frame();
  policy.bit_after_reset = config.iters_for_reset_frame();
  policy.delayed_indexing = config.delayed_indexing;

  const ChannelTensor first = fading.at(0);
  std::unique_ptr<Engine> engine = make_engine(
      config, cluster, p_max, sigma2, mu,
      matched_filter_init(first, cluster, p_max), base.derive(2),
      base.derive(3));

  BeamformerPair pair;
  pair.training = engine->beams();

  int failed_frame = -1;
  try {
    for (int frame = 0; frame < config.frames; ++frame) {
      failed_frame = frame;
      const ChannelTensor channels = fading.at(frame);
      const bool periodic_reset = frame > 0 && is_reset_frame(frame, policy);
      if (periodic_reset) {
        // Keep the converged pre-reset set around for delayed indexing.
        pair.active = engine->beams();
        pair.has_stored_active = true;
        engine->reset(channels);
      }
      engine->on_frame(channels);
      const int iters = bit_for_frame(frame, policy);
      for (int it = 0; it < iters; ++it) {
        engine->step(channels, /*refresh_weights=*/it == 0);
        pair.training = engine->beams();
        const BeamformerSet& active_set = select_active(pair, frame, policy);
        MetricsRow row;
        row.frame = frame;
        row.inner_iteration = it;
        row.algorithm = config.algorithm;
        row.seed = config.seed;
        row.sum_rate =
            weighted_sum_rate(channels, active_set, cluster, sigma2, mu);
        row.effective_rate = effective_rate(schedule, row.sum_rate);
        row.per_bs_power.resize(config.cells);
        for (int b = 0; b < config.cells; ++b)
          row.per_bs_power[b] = per_bs_power(active_set, b);
        row.consensus_residual = engine->consensus_residual();
        row.gradient_norm = engine->gradient_norm();
        row.active_streams = count_active(engine->state());
        row.backhaul_scalars = engine->ledger_scalars();
        row.quantizer_saturation_events = engine->take_saturation_delta();
        result.rows.push_back(std::move(row));
      }
      engine->apply_active_flags(detect_dropped(engine->beams(), cluster,
                                                engine->state().active,
                                                policy.drop_threshold));
      pair.training = engine->beams();
      engine->decay_quantizer_ranges();
    }
    failed_frame = -1;
  } catch (const std::exception& error) {
    result.failed = true;
    result.error =
        "frame " + std::to_string(failed_frame) + ": " + error.what();
  }

  std::ostringstream summary;
  const double final_rate =
      result.rows.empty() ? 0.0 : result.rows.back().sum_rate;
  const double final_effective =
      result.rows.empty() ? 0.0 : result.rows.back().effective_rate;
  const long long scalars =
      result.rows.empty() ? 0 : result.rows.back().backhaul_scalars;
  summary << "run algorithm=" << config.algorithm << " seed=" << config.seed
          << " frames=" << config.frames << " rows=" << result.rows.size()
          << " final_sum_rate=" << fmt_g(final_rate)
          << " final_effective_rate=" << fmt_g(final_effective)
          << " backhaul_scalars=" << scalars;
  if (result.failed) summary << " error=\"" << result.error << '"';
  result.summary = summary.str();
  return result;
}

SweepResult run_sweep(const ScenarioConfig& base, const std::string& axis,
                      const std::vector<std::string>& values, int seeds,
                      const std::string& out_dir) {
  if (seeds < 1) throw std::invalid_argument("sweep needs seeds >= 1");
  if (values.empty()) throw std::invalid_argument("sweep needs values");
  std::filesystem::create_directories(out_dir);
  SweepResult result;
  std::ostringstream table;
  table << axis << ",seeds_ok,seeds_failed,mean_final_sum_rate\n";
  for (const std::string& value : values) {
    SweepEntry entry;
    entry.value = value;
    std::vector<MetricsRow> combined;
    try {
      ScenarioConfig cell = base;
      set_config_key(cell, axis, value);
      cell.validate();
      std::vector<std::future<RunResult>> futures;
      futures.reserve(seeds);
      for (int i = 0; i < seeds; ++i) {
        ScenarioConfig run_config = cell;
        run_config.seed = base.seed + static_cast<unsigned long long>(i);
        futures.push_back(std::async(
            std::launch::async,
            [run_config]() { return run_scenario(run_config); }));
      }
      double rate_sum = 0.0;
      for (auto& future : futures) {
        RunResult run = future.get();
        if (run.failed) {
          ++entry.seeds_failed;
          if (entry.first_error.empty()) entry.first_error = run.error;
        } else {
          ++entry.seeds_ok;
          rate_sum += run.rows.empty() ? 0.0 : run.rows.back().sum_rate;
        }
        combined.insert(combined.end(),
                        std::make_move_iterator(run.rows.begin()),
                        std::make_move_iterator(run.rows.end()));
      }
      if (entry.seeds_ok > 0) entry.mean_final_sum_rate = rate_sum / entry.seeds_ok;
      const std::string file =
          (std::filesystem::path(out_dir) /
           ("sweep_" + sanitize_for_filename(axis) + "_" +
            sanitize_for_filename(value) + ".csv"))
              .string();
      write_csv_file(combined, file);
      result.files.push_back(file);
    } catch (const std::exception& error) {
      entry.seeds_failed = seeds - entry.seeds_ok;
      if (entry.first_error.empty()) entry.first_error = error.what();
      result.failed = true;  // covers output errors after all seeds succeeded
    }
    if (entry.seeds_failed > 0) result.failed = true;
    table << entry.value << ',' << entry.seeds_ok << ',' << entry.seeds_failed
          << ',' << fmt_g(entry.mean_final_sum_rate);
    if (!entry.first_error.empty())
      table << "  # " << entry.first_error;
    table << '\n';
    result.entries.push_back(std::move(entry));
  }
  result.summary_table = table.str();
  return result;
}

}  // namespace jplink
