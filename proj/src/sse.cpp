// SPDX-License-Identifier: Apache-2.0
#include "jplink/sse.hpp"

#include <cmath>
#include <stdexcept>

namespace jplink {
namespace {

int active_count(const StreamState& state) {
  int n = 0;
  for (char a : state.active) n += a != 0;
  return n;
}

// Transmit-side effective channels a_rx = H(b, k_rx)^H u_rx for every active
// receiving stream, as seen from station b.
arma::cx_mat effective_tx_channels(const ChannelTensor& channels,
                                   const ReceiverSet& receivers,
                                   const StreamState& state,
                                   const ClusterMap& cluster, int b) {
  const int n = cluster.total_streams();
  arma::cx_mat a(channels.nt(), n, arma::fill::zeros);
  for (int rx = 0; rx < n; ++rx) {
    if (!state.active[rx]) continue;
    a.col(rx) = channels.H(b, cluster.user_of(rx)).t() * receivers.u.col(rx);
  }
  return a;
}

}  // namespace

arma::cx_mat br_fixed_terms(const ClusterMap& cluster, const StreamState& state,
                            const arma::cx_cube& signals, int b) {
  const int n = cluster.total_streams();
  arma::cx_mat c(n, n, arma::fill::zeros);
  for (int tx = 0; tx < n; ++tx) {
    if (!state.active[tx]) continue;
    for (int r : cluster.serving[cluster.user_of(tx)]) {
      if (r == b) continue;
      for (int rx = 0; rx < n; ++rx) {
        if (!state.active[rx]) continue;
        c(rx, tx) += signals(rx, tx, r);
      }
    }
  }
  return c;
}

BisectionResult br_local_solve(const ChannelTensor& channels,
                               const ReceiverSet& receivers,
                               const StreamState& state,
                               const ClusterMap& cluster,
                               const arma::cx_cube& signals, int b,
                               double p_max, const BisectionSpec& spec) {
  const LocalBlock block =
      build_local_block(channels, receivers, state, cluster, signals, b);
  return bisect_power_dual(block.base, block.rhs, p_max, spec);
}

void regulated_update(BeamformerSet& beams, int b,
                      const std::vector<int>& stream_ids,
                      const arma::cx_mat& solution, double alpha) {
  for (size_t c = 0; c < stream_ids.size(); ++c) {
    arma::cx_vec old = beams.m.slice(stream_ids[c]).col(b);
    beams.m.slice(stream_ids[c]).col(b) = old + alpha * (solution.col(c) - old);
  }
}

arma::cx_mat admm_s_update(const arma::cx_mat& received,
                           const arma::cx_mat& lambda_bar, double rho) {
  return (rho / (1.0 + rho)) * (received + lambda_bar);
}

arma::cx_mat admm_dual_update(const arma::cx_mat& lambda_bar,
                              const arma::cx_mat& received,
                              const arma::cx_mat& s_bar) {
  return lambda_bar + received - s_bar;
}

BisectionResult admm_local_solve(const ChannelTensor& channels,
                                 const ReceiverSet& receivers,
                                 const StreamState& state,
                                 const ClusterMap& cluster,
                                 const arma::cx_mat& q_peers, double rho, int b,
                                 double p_max, const BisectionSpec& spec) {
  const int n = cluster.total_streams();
  const arma::cx_mat a =
      effective_tx_channels(channels, receivers, state, cluster, b);

  arma::cx_mat base(channels.nt(), channels.nt(), arma::fill::zeros);
  for (int rx = 0; rx < n; ++rx) {
    if (!state.active[rx]) continue;
    base += rho * state.weight(rx) * (a.col(rx) * a.col(rx).t());
  }

  std::vector<int> ids;
  for (int s = 0; s < n; ++s)
    if (state.active[s] && cluster.serves(b, cluster.user_of(s)))
      ids.push_back(s);

  arma::cx_mat rhs(channels.nt(), ids.size(), arma::fill::zeros);
  for (size_t c = 0; c < ids.size(); ++c) {
    const int s = ids[c];
    arma::cx_vec col = state.weight(s) * a.col(s);
    for (int rx = 0; rx < n; ++rx) {
      if (!state.active[rx]) continue;
      col -= rho * std::sqrt(state.weight(rx)) * q_peers(rx, s) * a.col(rx);
    }
    rhs.col(c) = col;
  }

  BisectionResult result = bisect_power_dual(base, rhs, p_max, spec);
  return result;
}

ConsensusSplit reconstruct_consensus_split(const arma::cx_cube& contributions,
                                           const arma::cx_mat& s_bar,
                                           const arma::cx_mat& lambda_bar,
                                           const ClusterMap& cluster,
                                           const StreamState& state) {
  const int n = cluster.total_streams();
  const int cells = cluster.cells();
  ConsensusSplit split;
  split.per_bs_s.zeros(n, n, cells);
  split.a_terms.zeros(n, n, cells);
  split.lambda_terms.zeros(n, n, cells);

  for (int tx = 0; tx < n; ++tx) {
    if (!state.active[tx]) continue;
    const auto& servers = cluster.serving[cluster.user_of(tx)];
    const double share = static_cast<double>(servers.size());
    for (int rx = 0; rx < n; ++rx) {
      if (!state.active[rx]) continue;
      std::complex<double> received(0.0, 0.0);
      for (int g : servers) received += contributions(rx, tx, g);
      const std::complex<double> common =
          (s_bar(rx, tx) - lambda_bar(rx, tx) - received) / share;
      for (int b : servers) {
        const std::complex<double> lam = lambda_bar(rx, tx) / share;
        split.lambda_terms(rx, tx, b) = lam;
        split.a_terms(rx, tx, b) = lam + contributions(rx, tx, b);
        split.per_bs_s(rx, tx, b) = split.a_terms(rx, tx, b) + common;
      }
    }
  }
  return split;
}

bool consensus_split_check(const ConsensusSplit& split,
                           const arma::cx_mat& s_bar,
                           const ClusterMap& cluster, const StreamState& state,
                           double tol) {
  const int n = cluster.total_streams();
  for (int tx = 0; tx < n; ++tx) {
    if (!state.active[tx]) continue;
    const auto& servers = cluster.serving[cluster.user_of(tx)];
    for (int rx = 0; rx < n; ++rx) {
      if (!state.active[rx]) continue;
      const double scale =
          std::max(1.0, std::abs(s_bar(rx, tx)));
      // (i) the per-station consensus variables aggregate exactly
      std::complex<double> sum(0.0, 0.0);
      for (int b : servers) sum += split.per_bs_s(rx, tx, b);
      if (std::abs(sum - s_bar(rx, tx)) > tol * scale) return false;
      // (ii) the implied next per-station duals are station independent
      std::complex<double> ref(0.0, 0.0);
      bool first = true;
      for (int b : servers) {
        // next dual = lambda_b + (contribution_b - s_b); contribution_b is
        // a_b - lambda_b by construction.
        const std::complex<double> next =
            split.a_terms(rx, tx, b) - split.per_bs_s(rx, tx, b);
        if (first) {
          ref = next;
          first = false;
        } else if (std::abs(next - ref) > tol * std::max(1.0, std::abs(ref))) {
          return false;
        }
      }
    }
  }
  return true;
}

arma::cx_vec sg_gradient(const ChannelTensor& channels,
                         const ReceiverSet& receivers, const StreamState& state,
                         const ClusterMap& cluster,
                         const arma::cx_mat& coherent, int b, int s) {
  const int n = cluster.total_streams();
  const arma::cx_mat a =
      effective_tx_channels(channels, receivers, state, cluster, b);
  arma::cx_vec g(channels.nt(), arma::fill::zeros);
  for (int rx = 0; rx < n; ++rx) {
    if (!state.active[rx]) continue;
    g += std::sqrt(state.weight(rx)) * coherent(rx, s) * a.col(rx);
  }
  g = 2.0 * g - 2.0 * state.weight(s) * a.col(s);
  return g;
}

void feasible_projection(BeamformerSet& beams) {
  for (int b = 0; b < beams.cells(); ++b) {
    const double p = per_bs_power(beams, b);
    if (p > beams.p_max(b)) {
      const double scale = std::sqrt(beams.p_max(b) / p);
      for (int s = 0; s < beams.total_streams(); ++s)
        beams.m.slice(s).col(b) *= scale;
    }
  }
}

// ---------------------------------------------------------------------------
// SseStepper

SseStepper::SseStepper(ClusterMap cluster, arma::vec p_max, arma::vec sigma2,
                       arma::vec mu, BeamformerSet init_beams,
                       SseOptions options)
    : cluster_(std::move(cluster)),
      sigma2_(std::move(sigma2)),
      mu_(std::move(mu)),
      options_(options),
      beams_(std::move(init_beams)) {
  if (beams_.p_max.n_elem == 0) beams_.p_max = std::move(p_max);
  state_ = make_stream_state(cluster_, mu_, sigma2_);
  br_.alpha = options_.alpha;
  admm_.rho = options_.rho;
  sg_.alpha = options_.sg_alpha;
  sg_.beta_dual = options_.sg_beta;
  sg_.omega = options_.omega;
  sg_.normalize = options_.normalize;
  sg_.momentum = options_.momentum;
  sg_.power_mode = options_.power_mode;
  ledger_.scheme = options_.exchange;
  const size_t n = static_cast<size_t>(cluster_.total_streams());
  links_.resize(n * n * cluster_.cells());
  for (auto& link : links_) {
    link.q_bits = options_.q_bits;
    link.smoothing_beta = options_.smoothing_beta;
  }
}

void SseStepper::ensure_init(const ChannelTensor& channels) {
  if (initialized_) return;
  const int n = cluster_.total_streams();
  receivers_ = mmse_receiver(channels, beams_, cluster_, sigma2_, &state_);
  for (int s = 0; s < n; ++s) {
    if (!state_.active[s]) continue;
    state_.epsilon(s) = compute_mse(channels, beams_, receivers_, cluster_,
                                    sigma2_(cluster_.user_of(s)), s);
  }
  state_ = update_weights(std::move(state_), mu_, cluster_);

  admm_.s_bar.zeros(n, n);
  admm_.lambda_bar.zeros(n, n);
  sg_.nu.zeros(cluster_.cells());
  sg_.momentum_buf.zeros(beams_.m.n_rows, beams_.m.n_cols, beams_.m.n_slices);

  if (options_.algorithm == SseAlgorithm::admm) {
    // Initial coherent signals known from the training that set up the
    // receivers; not an exchange round, so no quantization or ledger charge.
    arma::cx_cube y = link_signals(channels, beams_, receivers_, cluster_, &state_);
    delivered_contrib_.zeros(n, n, cluster_.cells());
    for (int b = 0; b < cluster_.cells(); ++b)
      for (int tx = 0; tx < n; ++tx)
        for (int rx = 0; rx < n; ++rx)
          delivered_contrib_(rx, tx, b) =
              std::sqrt(state_.weight(rx)) * y(rx, tx, b);
    received_sum_ = arma::sum(delivered_contrib_, 2);
  }
  initialized_ = true;
}

void SseStepper::update_receivers_and_weights(const ChannelTensor& channels,
                                              bool refresh_weights) {
  if (!options_.update_receivers) return;
  receivers_ = mmse_receiver(channels, beams_, cluster_, sigma2_, &state_);
  for (int s = 0; s < cluster_.total_streams(); ++s) {
    if (!state_.active[s]) continue;
    state_.epsilon(s) = compute_mse(channels, beams_, receivers_, cluster_,
                                    sigma2_(cluster_.user_of(s)), s);
  }
  if (refresh_weights)
    state_ = update_weights(std::move(state_), mu_, cluster_);
}

arma::cx_cube SseStepper::deliver(const arma::cx_cube& signals) {
  arma::cx_cube out(arma::size(signals), arma::fill::zeros);
  const int n = cluster_.total_streams();
  for (int b = 0; b < cluster_.cells(); ++b) {
    for (int tx = 0; tx < n; ++tx) {
      if (!state_.active[tx]) continue;
      if (!cluster_.serves(b, cluster_.user_of(tx))) continue;
      for (int rx = 0; rx < n; ++rx) {
        if (!state_.active[rx]) continue;
        const size_t idx =
            static_cast<size_t>(rx) + static_cast<size_t>(n) * tx +
            static_cast<size_t>(n) * n * b;
        out(rx, tx, b) = quantize_differential(links_[idx], signals(rx, tx, b));
      }
    }
  }
  // Table-style accounting: one scalar per active stream per round for the
  // stream-exchange schemes, the full CSI payload otherwise.
  const long long round_scalars =
      ledger_.scheme == ExchangeScheme::global_csi
          ? account_exchange(ledger_.scheme, cluster_, beams_.nt(),
                             static_cast<int>(receivers_.u.n_rows))
          : active_count(state_);
  ledger_.add_round(round_scalars);
  return out;
}

void SseStepper::step_br(const ChannelTensor& channels, bool refresh_weights) {
  update_receivers_and_weights(channels, refresh_weights);
  const arma::cx_cube y =
      link_signals(channels, beams_, receivers_, cluster_, &state_);
  const arma::cx_cube y_hat = deliver(y);
  for (int b = 0; b < cluster_.cells(); ++b) {
    const LocalBlock block =
        build_local_block(channels, receivers_, state_, cluster_, y_hat, b);
    if (block.stream_ids.empty()) continue;
    const BisectionResult sol = bisect_power_dual(
        block.base, block.rhs, beams_.p_max(b), options_.bisection);
    regulated_update(beams_, b, block.stream_ids, sol.beams, br_.alpha);
  }
}

void SseStepper::step_admm(const ChannelTensor& channels, bool refresh_weights) {
  const int n = cluster_.total_streams();
  // 1. Station solves against the last exchanged coherent signals.
  for (int b = 0; b < cluster_.cells(); ++b) {
    const arma::cx_mat q_peers = (received_sum_ - delivered_contrib_.slice(b)) -
                                 admm_.s_bar + admm_.lambda_bar;
    const BisectionResult sol =
        admm_local_solve(channels, receivers_, state_, cluster_, q_peers,
                         admm_.rho, b, beams_.p_max(b), options_.bisection);
    std::vector<int> ids;
    for (int s = 0; s < n; ++s)
      if (state_.active[s] && cluster_.serves(b, cluster_.user_of(s)))
        ids.push_back(s);
    for (size_t c = 0; c < ids.size(); ++c)
      beams_.m.slice(ids[c]).col(b) = sol.beams.col(c);
  }

  // 2. Exchange the new coherent contributions and update the consensus.
  const arma::cx_cube y =
      link_signals(channels, beams_, receivers_, cluster_, &state_);
  arma::cx_cube contrib(n, n, cluster_.cells(), arma::fill::zeros);
  for (int b = 0; b < cluster_.cells(); ++b)
    for (int tx = 0; tx < n; ++tx)
      for (int rx = 0; rx < n; ++rx)
        contrib(rx, tx, b) = std::sqrt(state_.weight(rx)) * y(rx, tx, b);
  delivered_contrib_ = deliver(contrib);
  received_sum_ = arma::sum(delivered_contrib_, 2);

  admm_.s_bar = admm_s_update(received_sum_, admm_.lambda_bar, admm_.rho);
  consensus_residual_ = 0.0;
  for (int tx = 0; tx < n; ++tx)
    for (int rx = 0; rx < n; ++rx)
      if (state_.active[tx] && state_.active[rx])
        consensus_residual_ =
            std::max(consensus_residual_,
                     std::abs(received_sum_(rx, tx) - admm_.s_bar(rx, tx)));

  const ConsensusSplit split = reconstruct_consensus_split(
      delivered_contrib_, admm_.s_bar, admm_.lambda_bar, cluster_, state_);
  last_split_ok_ = consensus_split_check(split, admm_.s_bar, cluster_, state_);

  admm_.lambda_bar =
      admm_dual_update(admm_.lambda_bar, received_sum_, admm_.s_bar);

  // 3. Receive-side refresh.
  update_receivers_and_weights(channels, refresh_weights);
}

void SseStepper::step_sg(const ChannelTensor& channels, bool refresh_weights) {
  update_receivers_and_weights(channels, refresh_weights);
  const int n = cluster_.total_streams();
  const arma::cx_cube y =
      link_signals(channels, beams_, receivers_, cluster_, &state_);
  arma::cx_cube contrib(n, n, cluster_.cells(), arma::fill::zeros);
  for (int b = 0; b < cluster_.cells(); ++b)
    for (int tx = 0; tx < n; ++tx)
      for (int rx = 0; rx < n; ++rx)
        contrib(rx, tx, b) = std::sqrt(state_.weight(rx)) * y(rx, tx, b);
  const arma::cx_cube delivered = deliver(contrib);
  const arma::cx_mat coherent = arma::sum(delivered, 2);

  arma::cx_cube grad(beams_.m.n_rows, beams_.m.n_cols, beams_.m.n_slices,
                     arma::fill::zeros);
  double norm2 = 0.0;
  for (int b = 0; b < cluster_.cells(); ++b) {
    for (int s = 0; s < n; ++s) {
      if (!state_.active[s]) continue;
      if (!cluster_.serves(b, cluster_.user_of(s))) continue;
      const arma::cx_vec g =
          sg_gradient(channels, receivers_, state_, cluster_, coherent, b, s);
      grad.slice(s).col(b) = g;
      norm2 += std::real(arma::cdot(g, g));
    }
  }
  gradient_norm_ = std::sqrt(norm2);

  if (sg_.momentum)
    sg_.momentum_buf = grad + sg_.omega * sg_.momentum_buf;
  else
    sg_.momentum_buf = grad;

  for (int s = 0; s < n; ++s) {
    if (!state_.active[s]) continue;
    double step = sg_.alpha;
    if (sg_.normalize) {
      double g2 = 0.0;
      for (int b : cluster_.serving[cluster_.user_of(s)])
        g2 += std::real(arma::cdot(grad.slice(s).col(b), grad.slice(s).col(b)));
      step = sg_.alpha / std::max(g2, 1e-30);
    }
    for (int b : cluster_.serving[cluster_.user_of(s)]) {
      arma::cx_vec m = beams_.m.slice(s).col(b);
      arma::cx_vec direction = sg_.momentum_buf.slice(s).col(b);
      if (sg_.power_mode == SgPowerMode::dual) direction += sg_.nu(b) * m;
      beams_.m.slice(s).col(b) = m - step * direction;
    }
  }

  if (sg_.power_mode == SgPowerMode::dual) {
    for (int b = 0; b < cluster_.cells(); ++b) {
      const double p = per_bs_power(beams_, b);
      sg_.nu(b) = std::max(0.0, sg_.nu(b) + sg_.beta_dual * (p - beams_.p_max(b)));
    }
  } else {
    feasible_projection(beams_);
  }
}

void SseStepper::step(const ChannelTensor& channels,
                      std::optional<bool> refresh_weights) {
  ensure_init(channels);
  const bool refresh = refresh_weights.value_or(options_.refresh_weights);
  switch (options_.algorithm) {
    case SseAlgorithm::best_response:
      step_br(channels, refresh);
      break;
    case SseAlgorithm::admm:
      step_admm(channels, refresh);
      break;
    case SseAlgorithm::stochastic_gradient:
      step_sg(channels, refresh);
      break;
  }
}

long long SseStepper::saturation_events() const {
  long long total = 0;
  for (const auto& link : links_) total += link.saturations;
  return total;
}

long long SseStepper::take_saturation_delta() {
  const long long total = saturation_events();
  const long long delta = total - saturation_mark_;
  saturation_mark_ = total;
  return delta;
}

void SseStepper::apply_active_flags(const std::vector<char>& active) {
  state_.active = active;
  for (int s = 0; s < cluster_.total_streams(); ++s)
    if (!state_.active[s]) beams_.m.slice(s).zeros();
  state_ = update_weights(std::move(state_), mu_, cluster_);
}

void SseStepper::reset(const ChannelTensor& channels) {
  const arma::vec p_max = beams_.p_max;
  beams_ = matched_filter_init(channels, cluster_, p_max);
  state_ = make_stream_state(cluster_, mu_, sigma2_);
  initialized_ = false;
  ensure_init(channels);
}

void SseStepper::decay_quantizer_ranges(double factor) {
  for (auto& link : links_) decay_range(link, factor);
}

SseTrace run_sse(const ChannelTensor& channels, const ClusterMap& cluster,
                 const arma::vec& p_max, const arma::vec& sigma2,
                 const arma::vec& mu, const BeamformerSet& init_beams,
                 const SseOptions& options, int iters) {
  SseStepper stepper(cluster, p_max, sigma2, mu, init_beams, options);
  SseTrace trace;
  trace.sum_rate.set_size(iters);
  trace.per_bs_power.set_size(iters, cluster.cells());
  trace.consensus_residual.zeros(iters);
  trace.gradient_norm.zeros(iters);
  trace.split_ok.assign(iters, 1);
  for (int it = 0; it < iters; ++it) {
    stepper.step(channels);
    trace.sum_rate(it) =
        weighted_sum_rate(channels, stepper.beams(), cluster, sigma2, mu,
                          nullptr, &stepper.state());
    for (int b = 0; b < cluster.cells(); ++b)
      trace.per_bs_power(it, b) = per_bs_power(stepper.beams(), b);
    trace.consensus_residual(it) = stepper.consensus_residual();
    trace.gradient_norm(it) = stepper.gradient_norm();
    trace.split_ok[it] = stepper.last_split_ok();
  }
  trace.ledger = stepper.ledger();
  return trace;
}

}  // namespace jplink
