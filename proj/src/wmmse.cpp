// SPDX-License-Identifier: Apache-2.0
#include "jplink/wmmse.hpp"

#include <cmath>
#include <stdexcept>

namespace jplink {
namespace {

// Transmit power of (base + nu I)^{-1} rhs expressed in the eigenbasis:
// sum_i coeff(i, s) / (lambda_i + nu)^2.  Zero coefficients contribute zero
// even on a null eigendirection, matching the pseudo-inverse convention.
double power_at(const arma::vec& lambda, const arma::mat& coeff, double nu) {
  double p = 0.0;
  for (arma::uword i = 0; i < lambda.n_elem; ++i) {
    const double d = lambda(i) + nu;
    for (arma::uword s = 0; s < coeff.n_cols; ++s) {
      const double c = coeff(i, s);
      if (c == 0.0) continue;
      if (d <= 0.0) return arma::datum::inf;
      p += c / (d * d);
    }
  }
  return p;
}

arma::cx_mat beams_at(const arma::cx_mat& q, const arma::vec& lambda,
                      const arma::cx_mat& proj, double nu) {
  arma::cx_mat scaled = proj;
  for (arma::uword i = 0; i < lambda.n_elem; ++i) {
    const double d = lambda(i) + nu;
    if (d > 0.0)
      scaled.row(i) /= d;
    else
      scaled.row(i).zeros();
  }
  return q * scaled;
}

}  // namespace

BisectionResult bisect_power_dual(const arma::cx_mat& base,
                                  const arma::cx_mat& rhs, double p_max,
                                  const BisectionSpec& spec) {
  if (p_max <= 0.0) throw std::invalid_argument("power budget must be > 0");
  const arma::uword nt = base.n_rows;
  BisectionResult result;
  result.beams.zeros(nt, rhs.n_cols);
  if (arma::norm(rhs, "fro") == 0.0) return result;  // all-zero targets

  arma::vec lambda;
  arma::cx_mat q;
  if (!arma::eig_sym(lambda, q, arma::cx_mat(0.5 * (base + base.t()))))
    throw std::runtime_error("eigendecomposition failed in power bisection");
  lambda.transform([](double v) { return v < 0.0 ? 0.0 : v; });

  const arma::cx_mat proj = q.t() * rhs;
  const arma::mat coeff = arma::square(arma::abs(proj));

  const double lo = spec.dual_lower;
  const double p_lo = power_at(lambda, coeff, lo);
  if (p_lo <= p_max) {  // budget slack: complementary slackness picks nu = lo
    result.nu = lo;
    result.power = p_lo;
    result.beams = beams_at(q, lambda, proj, lo);
    return result;
  }

  double hi = spec.dual_upper;
  if (hi <= 0.0) {
    hi = std::max(std::real(arma::trace(base)) / nt, 1e-12) * 1e3;
    int doublings = 0;
    while (power_at(lambda, coeff, hi) >= p_max) {
      hi *= 2.0;
      if (++doublings > 200)
        throw ConvergenceError("bisection bracket expansion failed", hi,
                               power_at(lambda, coeff, hi), doublings);
    }
  }

  double a = lo, b = hi;
  double nu = b, p = power_at(lambda, coeff, b);
  for (int it = 0; it < spec.max_iters; ++it) {
    nu = 0.5 * (a + b);
    p = power_at(lambda, coeff, nu);
    if (std::abs(p - p_max) <= spec.tolerance * p_max) {
      result.nu = nu;
      result.power = p;
      result.iterations = it + 1;
      result.constrained = true;
      result.beams = beams_at(q, lambda, proj, nu);
      return result;
    }
    (p > p_max ? a : b) = nu;
  }
  throw ConvergenceError("power-dual bisection did not converge", nu, p,
                         spec.max_iters);
}

LocalBlock build_local_block(const ChannelTensor& channels,
                             const ReceiverSet& receivers,
                             const StreamState& state, const ClusterMap& cluster,
                             const arma::cx_cube& signals, int b) {
  const int nt = channels.nt();
  const int n = cluster.total_streams();

  // Effective transmit-side channels a_rx = H(b, k_rx)^H u_rx of every active
  // receiving stream.
  arma::cx_mat a(nt, n, arma::fill::zeros);
  for (int rx = 0; rx < n; ++rx) {
    if (!state.active[rx]) continue;
    a.col(rx) = channels.H(b, cluster.user_of(rx)).t() * receivers.u.col(rx);
  }

  LocalBlock block;
  block.base.zeros(nt, nt);
  for (int rx = 0; rx < n; ++rx) {
    if (!state.active[rx]) continue;
    block.base += state.weight(rx) * (a.col(rx) * a.col(rx).t());
  }

  for (int s = 0; s < n; ++s) {
    if (!state.active[s]) continue;
    if (!cluster.serves(b, cluster.user_of(s))) continue;
    block.stream_ids.push_back(s);
  }
  block.rhs.zeros(nt, block.stream_ids.size());
  for (size_t c = 0; c < block.stream_ids.size(); ++c) {
    const int s = block.stream_ids[c];
    const auto& tx_set = cluster.serving[cluster.user_of(s)];
    arma::cx_vec rhs = state.weight(s) * a.col(s);
    for (int rx = 0; rx < n; ++rx) {
      if (!state.active[rx]) continue;
      // Fixed coupling of the cooperating stations' beams for stream s as
      // seen by receiving stream rx.
      std::complex<double> fixed(0.0, 0.0);
      for (int r : tx_set)
        if (r != b) fixed += signals(rx, s, r);
      rhs -= state.weight(rx) * fixed * a.col(rx);
    }
    block.rhs.col(c) = rhs;
  }
  return block;
}

double weighted_sum_mse(const ChannelTensor& channels, const BeamformerSet& beams,
                        const ReceiverSet& receivers, const StreamState& state,
                        const ClusterMap& cluster) {
  double obj = 0.0;
  for (int s = 0; s < cluster.total_streams(); ++s) {
    if (!state.active[s]) continue;
    obj += state.weight(s) *
           compute_mse(channels, beams, receivers, cluster,
                       state.sigma2(cluster.user_of(s)), s);
  }
  return obj;
}

SolveReport solve_transmit_subproblem(const ChannelTensor& channels,
                                      BeamformerSet& beams,
                                      const ReceiverSet& receivers,
                                      const StreamState& state,
                                      const ClusterMap& cluster, int max_sweeps,
                                      double tol, const BisectionSpec& spec) {
  SolveReport report;
  double prev = weighted_sum_mse(channels, beams, receivers, state, cluster);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    for (int b = 0; b < cluster.cells(); ++b) {
      const arma::cx_cube signals =
          link_signals(channels, beams, receivers, cluster, &state);
      const LocalBlock block =
          build_local_block(channels, receivers, state, cluster, signals, b);
      if (block.stream_ids.empty()) continue;
      const BisectionResult sol =
          bisect_power_dual(block.base, block.rhs, beams.p_max(b), spec);
      for (size_t c = 0; c < block.stream_ids.size(); ++c)
        beams.m.slice(block.stream_ids[c]).col(b) = sol.beams.col(c);
    }
    report.sweeps = sweep + 1;
    const double cur = weighted_sum_mse(channels, beams, receivers, state, cluster);
    if (std::abs(prev - cur) <= tol * std::max(1.0, std::abs(prev))) {
      report.objective = cur;
      report.converged = true;
      return report;
    }
    prev = cur;
  }
  report.objective = prev;
  return report;
}

WmmseResult run_centralized(const ChannelTensor& channels,
                            const ClusterMap& cluster, const arma::vec& p_max,
                            const arma::vec& sigma2, const arma::vec& mu,
                            int iters) {
  WmmseResult result;
  result.beams = matched_filter_init(channels, cluster, p_max);
  StreamState state = make_stream_state(cluster, mu, sigma2);
  result.objective_trace.set_size(iters);

  for (int it = 0; it < iters; ++it) {
    result.receivers = mmse_receiver(channels, result.beams, cluster, sigma2, &state);
    for (int s = 0; s < cluster.total_streams(); ++s) {
      if (!state.active[s]) continue;
      state.epsilon(s) =
          compute_mse(channels, result.beams, result.receivers, cluster,
                      sigma2(cluster.user_of(s)), s);
    }
    state = update_weights(std::move(state), mu, cluster);
    solve_transmit_subproblem(channels, result.beams, result.receivers, state,
                              cluster);
    result.objective_trace(it) =
        weighted_sum_rate(channels, result.beams, cluster, sigma2, mu, nullptr,
                          &state);
  }
  return result;
}

}  // namespace jplink
