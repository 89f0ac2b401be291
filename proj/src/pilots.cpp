// SPDX-License-Identifier: Apache-2.0
#include "jplink/pilots.hpp"

#include <cmath>
#include <stdexcept>

namespace jplink {
namespace {

int active_count(const StreamState& state) {
  int n = 0;
  for (char a : state.active) n += a != 0;
  return n;
}

arma::cx_mat qpsk_sequences(int length, int count, Rng& rng) {
  arma::cx_mat book(length, count);
  const double a = M_SQRT1_2;
  for (int s = 0; s < count; ++s) {
    for (int t = 0; t < length; ++t) {
      const int sym = static_cast<int>(rng.uniform() * 4.0) & 3;
      book(t, s) = {a * ((sym & 1) ? -1.0 : 1.0), a * ((sym & 2) ? -1.0 : 1.0)};
    }
  }
  return book;
}

}  // namespace

PilotBook make_pilot_book(int length, int total_streams, bool orthogonal,
                          Rng& rng) {
  if (length < 1) throw std::invalid_argument("pilot length must be >= 1");
  if (orthogonal && length < total_streams)
    throw std::invalid_argument(
        "orthogonal pilots need length >= stream count (" +
        std::to_string(total_streams) + "), got " + std::to_string(length));
  PilotBook book;
  book.length = length;
  book.orthogonal = orthogonal;
  if (orthogonal) {
    book.ul.set_size(length, total_streams);
    book.dl.set_size(length, total_streams);
    for (int s = 0; s < total_streams; ++s) {
      for (int t = 0; t < length; ++t) {
        const double arg = -2.0 * M_PI * s * t / length;
        book.ul(t, s) = {std::cos(arg), std::sin(arg)};
      }
    }
    book.dl = book.ul;  // unit-modulus rows, squared norm = length
  } else {
    book.ul = qpsk_sequences(length, total_streams, rng);
    book.dl = qpsk_sequences(length, total_streams, rng);
  }
  return book;
}

arma::field<arma::cx_mat> ul_training(const ChannelTensor& channels,
                                      const ReceiverSet& receivers,
                                      const StreamState& state,
                                      const ClusterMap& cluster,
                                      const PilotBook& book,
                                      double noise_power, Rng& rng) {
  const int nt = channels.nt();
  arma::field<arma::cx_mat> R(cluster.cells());
  for (int b = 0; b < cluster.cells(); ++b) {
    arma::cx_mat acc(nt, book.length, arma::fill::zeros);
    for (int s = 0; s < cluster.total_streams(); ++s) {
      if (!state.active[s]) continue;
      const int k = cluster.user_of(s);
      const arma::cx_vec dir = channels.H(b, k).t() * receivers.u.col(s) *
                               std::sqrt(state.weight(s));
      acc += dir * book.ul.col(s).t();
    }
    if (noise_power > 0.0)
      acc += std::sqrt(noise_power) * rng.cgaussian_mat(nt, book.length);
    R(b) = std::move(acc);
  }
  return R;
}

arma::field<arma::cx_mat> dl_training(const ChannelTensor& channels,
                                      const BeamformerSet& beams,
                                      const StreamState& state,
                                      const ClusterMap& cluster,
                                      const PilotBook& book,
                                      double noise_power, Rng& rng) {
  const int nr = channels.nr();
  arma::field<arma::cx_mat> T(cluster.users());
  for (int k = 0; k < cluster.users(); ++k) {
    arma::cx_mat acc(nr, book.length, arma::fill::zeros);
    for (int s = 0; s < cluster.total_streams(); ++s) {
      if (!state.active[s]) continue;
      acc += effective_channel(channels, beams, cluster, k, s) *
             book.dl.col(s).t();
    }
    if (noise_power > 0.0)
      acc += std::sqrt(noise_power) * rng.cgaussian_mat(nr, book.length);
    T(k) = std::move(acc);
  }
  return T;
}

ReceiverSet de_mmse_receiver(const arma::field<arma::cx_mat>& T,
                             const PilotBook& book, const ClusterMap& cluster,
                             const StreamState& state, Diagnostics* diag) {
  const int nr = static_cast<int>(T(0).n_rows);
  ReceiverSet receivers;
  receivers.u.zeros(nr, cluster.total_streams());
  for (int s = 0; s < cluster.total_streams(); ++s) {
    if (!state.active[s]) continue;
    const int k = cluster.user_of(s);
    const arma::cx_mat gram = T(k) * T(k).t();
    const arma::cx_vec match = T(k) * book.dl.col(s);
    arma::cx_vec u;
    if (!arma::solve(u, gram, match, arma::solve_opts::no_approx)) {
      const double ridge =
          1e-12 * std::max(std::real(arma::trace(gram)) / nr, 1.0);
      u = arma::solve(gram + ridge * arma::eye<arma::cx_mat>(nr, nr), match);
      if (diag != nullptr) ++diag->regularized_solves;
    }
    receivers.u.col(s) = u;
  }
  return receivers;
}

BisectionResult de_br_solve(const arma::cx_mat& R_b, const PilotBook& book,
                            const StreamState& state, const ClusterMap& cluster,
                            const arma::cx_mat& peer_sums, int b, double p_max,
                            const BisectionSpec& spec) {
  const arma::cx_mat base = R_b * R_b.t();
  std::vector<int> ids;
  for (int s = 0; s < cluster.total_streams(); ++s)
    if (state.active[s] && cluster.serves(b, cluster.user_of(s)))
      ids.push_back(s);
  arma::cx_mat rhs(R_b.n_rows, ids.size());
  for (size_t c = 0; c < ids.size(); ++c) {
    const int s = ids[c];
    rhs.col(c) = R_b * (std::sqrt(state.weight(s)) * book.ul.col(s) -
                        peer_sums.col(s));
  }
  return bisect_power_dual(base, rhs, p_max, spec);
}

BisectionResult de_admm_solve(const arma::cx_mat& R_b, const PilotBook& book,
                              const StreamState& state,
                              const ClusterMap& cluster, const arma::cx_mat& q,
                              double rho, int b, double p_max,
                              const BisectionSpec& spec) {
  const arma::cx_mat base = rho * (R_b * R_b.t());
  std::vector<int> ids;
  for (int s = 0; s < cluster.total_streams(); ++s)
    if (state.active[s] && cluster.serves(b, cluster.user_of(s)))
      ids.push_back(s);
  arma::cx_mat rhs(R_b.n_rows, ids.size());
  for (size_t c = 0; c < ids.size(); ++c) {
    const int s = ids[c];
    rhs.col(c) = R_b * (std::sqrt(state.weight(s)) * book.ul.col(s) -
                        rho * q.col(s));
  }
  return bisect_power_dual(base, rhs, p_max, spec);
}

double de_admm_iterate(DeAdmmState& state, const arma::cx_mat& received_sum) {
  state.s_bar =
      (state.rho / (1.0 + state.rho)) * (received_sum + state.lambda_bar);
  const arma::cx_mat residual = received_sum - state.s_bar;
  state.lambda_bar += state.beta_dual * residual;
  return arma::abs(residual).max();
}

arma::cx_vec de_sg_gradient(const arma::cx_mat& R_b, const PilotBook& book,
                            const StreamState& state,
                            const arma::cx_mat& coherent, int b, int s) {
  (void)b;
  return (2.0 / book.length) *
         (R_b *
          (coherent.col(s) - std::sqrt(state.weight(s)) * book.ul.col(s)));
}

arma::cx_vec de_sg_gradient_symbolwise(const arma::cx_mat& R_b,
                                       const PilotBook& book,
                                       const StreamState& state,
                                       const arma::cx_mat& coherent, int b,
                                       int s) {
  (void)b;
  const double root_w = std::sqrt(state.weight(s));
  arma::cx_vec acc(R_b.n_rows, arma::fill::zeros);
  for (int t = 0; t < book.length; ++t)
    acc += R_b.col(t) * (coherent(t, s) - root_w * book.ul(t, s));
  return (2.0 / book.length) * acc;
}

bool ls_wmmse_equivalence_check(const ChannelTensor& channels,
                                const BeamformerSet& beams,
                                const ReceiverSet& receivers,
                                const StreamState& state,
                                const ClusterMap& cluster,
                                const arma::field<arma::cx_mat>& R,
                                const PilotBook& book, double tol) {
  const int n = cluster.total_streams();
  // Pilot-domain least-squares objective relative to zero beams.
  double de = 0.0;
  for (int s = 0; s < n; ++s) {
    if (!state.active[s]) continue;
    arma::cx_vec sum(book.length, arma::fill::zeros);
    std::complex<double> matched(0.0, 0.0);
    for (int b : cluster.serving[cluster.user_of(s)]) {
      const arma::cx_vec c = R(b).t() * beams.m.slice(s).col(b);
      sum += c;
      matched +=
          arma::cdot(beams.m.slice(s).col(b), R(b) * book.ul.col(s));
    }
    de += std::real(arma::cdot(sum, sum)) -
          2.0 * std::sqrt(state.weight(s)) * std::real(matched);
  }
  de /= book.length;

  // Weighted sum-MSE objective relative to zero beams: the zero-beam MSE is
  // the beam-independent constant 1 + ||u||^2 sigma^2.
  double sse = 0.0;
  for (int s = 0; s < n; ++s) {
    if (!state.active[s]) continue;
    const int k = cluster.user_of(s);
    const double eps = compute_mse(channels, beams, receivers, cluster,
                                   state.sigma2(k), s);
    const double eps0 =
        1.0 + state.sigma2(k) *
                  std::real(arma::cdot(receivers.u.col(s), receivers.u.col(s)));
    sse += state.weight(s) * (eps - eps0);
  }
  return std::abs(de - sse) <= tol * std::max(1.0, std::abs(sse));
}

// ---------------------------------------------------------------------------
// DeStepper

DeStepper::DeStepper(ClusterMap cluster, arma::vec p_max, arma::vec sigma2,
                     arma::vec mu, BeamformerSet init_beams, PilotBook book,
                     DeOptions options, Rng noise_rng)
    : cluster_(std::move(cluster)),
      sigma2_(std::move(sigma2)),
      mu_(std::move(mu)),
      book_(std::move(book)),
      options_(options),
      beams_(std::move(init_beams)),
      noise_rng_(noise_rng) {
  if (beams_.p_max.n_elem == 0) beams_.p_max = std::move(p_max);
  state_ = make_stream_state(cluster_, mu_, sigma2_);
  admm_.rho = options_.rho;
  admm_.beta_dual =
      options_.beta_dual > 0.0 ? options_.beta_dual : 1.0 / options_.rho;
  sg_.alpha = options_.sg_alpha;
  sg_.beta_dual = options_.sg_beta;
  sg_.omega = options_.omega;
  sg_.normalize = options_.normalize;
  sg_.momentum = options_.momentum;
  sg_.power_mode = options_.power_mode;
  ledger_.scheme = options_.exchange;
  links_.resize(static_cast<size_t>(book_.length) * cluster_.total_streams() *
                cluster_.cells());
  for (auto& link : links_) {
    link.q_bits = options_.q_bits;
    link.smoothing_beta = options_.smoothing_beta;
  }
}

void DeStepper::ensure_init(const ChannelTensor& channels) {
  if (initialized_) return;
  const int n = cluster_.total_streams();
  const arma::field<arma::cx_mat> T =
      dl_training(channels, beams_, state_, cluster_, book_,
                  options_.pilot_noise_power, noise_rng_);
  receivers_ = de_mmse_receiver(T, book_, cluster_, state_);
  for (int s = 0; s < n; ++s) {
    if (!state_.active[s]) continue;
    state_.epsilon(s) = compute_mse(channels, beams_, receivers_, cluster_,
                                    sigma2_(cluster_.user_of(s)), s);
  }
  state_ = update_weights(std::move(state_), mu_, cluster_);

  admm_.s_bar.zeros(book_.length, n);
  admm_.lambda_bar.zeros(book_.length, n);
  sg_.nu.zeros(cluster_.cells());
  sg_.momentum_buf.zeros(beams_.m.n_rows, beams_.m.n_cols, beams_.m.n_slices);

  R_ = ul_training(channels, receivers_, state_, cluster_, book_,
                   options_.pilot_noise_power, noise_rng_);
  if (options_.algorithm == DeAlgorithm::admm) {
    // Initialization shares the first coherent sums without an exchange round.
    delivered_ul_.zeros(book_.length, n, cluster_.cells());
    for (int b = 0; b < cluster_.cells(); ++b)
      for (int s = 0; s < n; ++s)
        if (state_.active[s] && cluster_.serves(b, cluster_.user_of(s)))
          delivered_ul_.slice(b).col(s) = R_(b).t() * beams_.m.slice(s).col(b);
  }
  initialized_ = true;
}

void DeStepper::receive_side_update(const ChannelTensor& channels,
                                    bool refresh_weights) {
  const arma::field<arma::cx_mat> T =
      dl_training(channels, beams_, state_, cluster_, book_,
                  options_.pilot_noise_power, noise_rng_);
  if (options_.update_receivers)
    receivers_ = de_mmse_receiver(T, book_, cluster_, state_);
  for (int s = 0; s < cluster_.total_streams(); ++s) {
    if (!state_.active[s]) continue;
    state_.epsilon(s) = compute_mse(channels, beams_, receivers_, cluster_,
                                    sigma2_(cluster_.user_of(s)), s);
  }
  if (refresh_weights)
    state_ = update_weights(std::move(state_), mu_, cluster_);
}

arma::cx_cube DeStepper::deliver(const arma::cx_cube& contributions) {
  arma::cx_cube out(arma::size(contributions), arma::fill::zeros);
  const int n = cluster_.total_streams();
  for (int b = 0; b < cluster_.cells(); ++b) {
    for (int s = 0; s < n; ++s) {
      if (!state_.active[s]) continue;
      if (!cluster_.serves(b, cluster_.user_of(s))) continue;
      for (int t = 0; t < book_.length; ++t) {
        const size_t idx = static_cast<size_t>(t) +
                           static_cast<size_t>(book_.length) * s +
                           static_cast<size_t>(book_.length) * n * b;
        out(t, s, b) =
            quantize_differential(links_[idx], contributions(t, s, b));
      }
    }
  }
  // Table-style accounting: one scalar per active stream per round for the
  // stream-exchange schemes, the full CSI payload otherwise.
  const long long round_scalars =
      ledger_.scheme == ExchangeScheme::global_csi
          ? account_exchange(ledger_.scheme, cluster_,
                             static_cast<int>(beams_.m.n_rows),
                             static_cast<int>(receivers_.u.n_rows))
          : active_count(state_);
  ledger_.add_round(round_scalars);
  return out;
}

void DeStepper::step(const ChannelTensor& channels,
                     std::optional<bool> refresh_weights) {
  ensure_init(channels);
  const bool refresh = refresh_weights.value_or(options_.refresh_weights);
  const int n = cluster_.total_streams();

  if (options_.algorithm == DeAlgorithm::admm) {
    // Fresh uplink training first: the quadratic terms must carry the current
    // receive filters and weights.  The stored consensus targets (delivered
    // contributions, s_bar, lambda_bar) live in the fixed pilot basis and are
    // re-weighted through the new R, mirroring the explicit-signal scheme.
    R_ = ul_training(channels, receivers_, state_, cluster_, book_,
                     options_.pilot_noise_power, noise_rng_);
    arma::cx_mat received = arma::sum(delivered_ul_, 2);
    for (int b = 0; b < cluster_.cells(); ++b) {
      arma::cx_mat q = (received - delivered_ul_.slice(b)) - admm_.s_bar +
                       admm_.lambda_bar;
      const BisectionResult sol =
          de_admm_solve(R_(b), book_, state_, cluster_, q, admm_.rho, b,
                        beams_.p_max(b), options_.bisection);
      std::vector<int> ids;
      for (int s = 0; s < n; ++s)
        if (state_.active[s] && cluster_.serves(b, cluster_.user_of(s)))
          ids.push_back(s);
      for (size_t c = 0; c < ids.size(); ++c)
        beams_.m.slice(ids[c]).col(b) = sol.beams.col(c);
    }
    // Exchange the post-solve contributions.
    arma::cx_cube contrib(book_.length, n, cluster_.cells(), arma::fill::zeros);
    for (int b = 0; b < cluster_.cells(); ++b)
      for (int s = 0; s < n; ++s)
        if (state_.active[s] && cluster_.serves(b, cluster_.user_of(s)))
          contrib.slice(b).col(s) = R_(b).t() * beams_.m.slice(s).col(b);
    delivered_ul_ = deliver(contrib);
    consensus_residual_ = de_admm_iterate(admm_, arma::sum(delivered_ul_, 2));
    receive_side_update(channels, refresh);
    return;
  }

  // Best response and gradient schemes: uplink training, exchange, solve.
  R_ = ul_training(channels, receivers_, state_, cluster_, book_,
                   options_.pilot_noise_power, noise_rng_);
  arma::cx_cube contrib(book_.length, n, cluster_.cells(), arma::fill::zeros);
  for (int b = 0; b < cluster_.cells(); ++b)
    for (int s = 0; s < n; ++s)
      if (state_.active[s] && cluster_.serves(b, cluster_.user_of(s)))
        contrib.slice(b).col(s) = R_(b).t() * beams_.m.slice(s).col(b);
  const arma::cx_cube delivered = deliver(contrib);

  if (options_.algorithm == DeAlgorithm::best_response) {
    for (int b = 0; b < cluster_.cells(); ++b) {
      arma::cx_mat peers(book_.length, n, arma::fill::zeros);
      for (int s = 0; s < n; ++s) {
        if (!state_.active[s]) continue;
        for (int j : cluster_.serving[cluster_.user_of(s)])
          if (j != b) peers.col(s) += delivered.slice(j).col(s);
      }
      const BisectionResult sol =
          de_br_solve(R_(b), book_, state_, cluster_, peers, b,
                      beams_.p_max(b), options_.bisection);
      std::vector<int> ids;
      for (int s = 0; s < n; ++s)
        if (state_.active[s] && cluster_.serves(b, cluster_.user_of(s)))
          ids.push_back(s);
      regulated_update(beams_, b, ids, sol.beams, options_.alpha);
    }
  } else {  // stochastic gradient
    const arma::cx_mat coherent = arma::sum(delivered, 2);
    arma::cx_cube grad(beams_.m.n_rows, beams_.m.n_cols, beams_.m.n_slices,
                       arma::fill::zeros);
    double norm2 = 0.0;
    for (int b = 0; b < cluster_.cells(); ++b) {
      for (int s = 0; s < n; ++s) {
        if (!state_.active[s]) continue;
        if (!cluster_.serves(b, cluster_.user_of(s))) continue;
        const arma::cx_vec g =
            de_sg_gradient(R_(b), book_, state_, coherent, b, s);
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
          g2 +=
              std::real(arma::cdot(grad.slice(s).col(b), grad.slice(s).col(b)));
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
        sg_.nu(b) =
            std::max(0.0, sg_.nu(b) + sg_.beta_dual * (p - beams_.p_max(b)));
      }
    } else {
      feasible_projection(beams_);
    }
  }

  receive_side_update(channels, refresh);
}

long long DeStepper::saturation_events() const {
  long long total = 0;
  for (const auto& link : links_) total += link.saturations;
  return total;
}

long long DeStepper::take_saturation_delta() {
  const long long total = saturation_events();
  const long long delta = total - saturation_mark_;
  saturation_mark_ = total;
  return delta;
}

void DeStepper::apply_active_flags(const std::vector<char>& active) {
  state_.active = active;
  for (int s = 0; s < cluster_.total_streams(); ++s)
    if (!state_.active[s]) beams_.m.slice(s).zeros();
  state_ = update_weights(std::move(state_), mu_, cluster_);
}

void DeStepper::reset(const ChannelTensor& channels) {
  const arma::vec p_max = beams_.p_max;
  beams_ = matched_filter_init(channels, cluster_, p_max);
  state_ = make_stream_state(cluster_, mu_, sigma2_);
  initialized_ = false;
  ensure_init(channels);
}

void DeStepper::decay_quantizer_ranges(double factor) {
  for (auto& link : links_) decay_range(link, factor);
}

SseTrace run_de(const ChannelTensor& channels, const ClusterMap& cluster,
                const arma::vec& p_max, const arma::vec& sigma2,
                const arma::vec& mu, const BeamformerSet& init_beams,
                const PilotBook& book, const DeOptions& options, int iters,
                Rng noise_rng) {
  DeStepper stepper(cluster, p_max, sigma2, mu, init_beams, book, options,
                    noise_rng);
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
  }
  trace.ledger = stepper.ledger();
  return trace;
}

}  // namespace jplink
