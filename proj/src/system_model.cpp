// SPDX-License-Identifier: Apache-2.0
#include "jplink/system_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace jplink {

bool ClusterMap::serves(int b, int k) const {
  const auto& set = serving[k];
  return std::find(set.begin(), set.end(), b) != set.end();
}

namespace {

void finish_cluster(ClusterMap& map, int streams_per_user) {
  const int users = map.users();
  map.streams.assign(users, streams_per_user);
  map.stream_offset.resize(users);
  map.stream_table.clear();
  for (int k = 0; k < users; ++k) {
    map.stream_offset[k] = static_cast<int>(map.stream_table.size());
    for (int l = 0; l < streams_per_user; ++l) map.stream_table.emplace_back(k, l);
  }
}

}  // namespace

ClusterMap make_full_cooperation(int cells, int users, int streams_per_user) {
  if (cells < 1 || users < 1 || streams_per_user < 1)
    throw std::invalid_argument("cluster dimensions must be >= 1");
  ClusterMap map;
  map.serving.resize(users);
  map.served.resize(cells);
  for (int k = 0; k < users; ++k)
    for (int b = 0; b < cells; ++b) map.serving[k].push_back(b);
  for (int b = 0; b < cells; ++b)
    for (int k = 0; k < users; ++k) map.served[b].push_back(k);
  finish_cluster(map, streams_per_user);
  return map;
}

ClusterMap make_per_cell(int cells, int users_per_cell, int streams_per_user) {
  if (cells < 1 || users_per_cell < 1 || streams_per_user < 1)
    throw std::invalid_argument("cluster dimensions must be >= 1");
  ClusterMap map;
  const int users = cells * users_per_cell;
  map.serving.resize(users);
  map.served.resize(cells);
  for (int k = 0; k < users; ++k) {
    const int b = k / users_per_cell;
    map.serving[k].push_back(b);
    map.served[b].push_back(k);
  }
  finish_cluster(map, streams_per_user);
  return map;
}

StreamState make_stream_state(const ClusterMap& cluster, const arma::vec& mu,
                              const arma::vec& sigma2) {
  const int n = cluster.total_streams();
  StreamState state;
  state.epsilon.ones(n);
  state.mu = mu;
  state.sigma2 = sigma2;
  state.active.assign(n, 1);
  state.weight.set_size(n);
  for (int s = 0; s < n; ++s)
    state.weight(s) = mu(cluster.user_of(s)) / std::log(2.0);
  return state;
}

arma::cx_vec effective_channel(const ChannelTensor& channels,
                               const BeamformerSet& beams,
                               const ClusterMap& cluster, int k, int s) {
  arma::cx_vec h(channels.nr(), arma::fill::zeros);
  const int tx_user = cluster.user_of(s);
  for (int b : cluster.serving[tx_user])
    h += channels.H(b, k) * beams.m.slice(s).col(b);
  return h;
}

namespace {

bool stream_active(const StreamState* state, int s) {
  return state == nullptr || state->active[static_cast<size_t>(s)];
}

}  // namespace

double compute_sinr(const ChannelTensor& channels, const BeamformerSet& beams,
                    const ReceiverSet& receivers, const ClusterMap& cluster,
                    double sigma2, int s) {
  const int k = cluster.user_of(s);
  const arma::cx_vec u = receivers.u.col(s);
  const std::complex<double> sig =
      arma::cdot(u, effective_channel(channels, beams, cluster, k, s));
  double denom = sigma2 * std::real(arma::cdot(u, u));
  for (int j = 0; j < cluster.total_streams(); ++j) {
    if (j == s) continue;
    const std::complex<double> x =
        arma::cdot(u, effective_channel(channels, beams, cluster, k, j));
    denom += std::norm(x);
  }
  const double num = std::norm(sig);
  if (num == 0.0 && denom == 0.0) return 0.0;  // dead stream convention
  return num / denom;
}

double compute_mse(const ChannelTensor& channels, const BeamformerSet& beams,
                   const ReceiverSet& receivers, const ClusterMap& cluster,
                   double sigma2, int s) {
  const int k = cluster.user_of(s);
  const arma::cx_vec u = receivers.u.col(s);
  const std::complex<double> sig =
      arma::cdot(u, effective_channel(channels, beams, cluster, k, s));
  double mse = std::norm(sig - 1.0) + sigma2 * std::real(arma::cdot(u, u));
  for (int j = 0; j < cluster.total_streams(); ++j) {
    if (j == s) continue;
    const std::complex<double> x =
        arma::cdot(u, effective_channel(channels, beams, cluster, k, j));
    mse += std::norm(x);
  }
  return mse;
}

ReceiverSet mmse_receiver(const ChannelTensor& channels,
                          const BeamformerSet& beams, const ClusterMap& cluster,
                          const arma::vec& sigma2, const StreamState* state,
                          Diagnostics* diag) {
  const int nr = channels.nr();
  const int n = cluster.total_streams();
  ReceiverSet receivers;
  receivers.u.zeros(nr, n);

  // Receive covariance per user: all coherent streams plus noise.
  std::vector<arma::cx_mat> cov(cluster.users());
  for (int k = 0; k < cluster.users(); ++k) {
    arma::cx_mat c(nr, nr, arma::fill::zeros);
    for (int j = 0; j < n; ++j) {
      if (!stream_active(state, j)) continue;
      const arma::cx_vec h = effective_channel(channels, beams, cluster, k, j);
      c += h * h.t();
    }
    c += sigma2(k) * arma::eye<arma::cx_mat>(nr, nr);
    cov[k] = std::move(c);
  }

  for (int s = 0; s < n; ++s) {
    if (!stream_active(state, s)) continue;
    const int k = cluster.user_of(s);
    const arma::cx_vec h = effective_channel(channels, beams, cluster, k, s);
    arma::cx_vec u;
    if (!arma::solve(u, cov[k], h, arma::solve_opts::no_approx)) {
      // Singular covariance (e.g. noiseless rank-deficient case): ridge
      // regularize proportionally to the covariance scale.
      const double ridge =
          1e-12 * std::max(std::real(arma::trace(cov[k])) / nr, 1.0);
      u = arma::solve(cov[k] + ridge * arma::eye<arma::cx_mat>(nr, nr), h);
      if (diag != nullptr) ++diag->regularized_solves;
    }
    receivers.u.col(s) = u;
  }
  return receivers;
}

bool mse_sinr_check(double epsilon, double gamma, double tol) {
  if (epsilon <= 0.0) return false;
  return std::abs(1.0 / epsilon - (1.0 + gamma)) <= tol * (1.0 + gamma);
}

StreamState update_weights(StreamState state, const arma::vec& mu,
                           const ClusterMap& cluster) {
  state.mu = mu;
  for (arma::uword s = 0; s < state.epsilon.n_elem; ++s) {
    if (!state.active[s]) {
      state.weight(s) = 0.0;
      continue;
    }
    if (state.epsilon(s) <= 0.0)
      throw std::domain_error("MSE must be positive to form rate weights");
    state.weight(s) =
        mu(cluster.user_of(static_cast<int>(s))) / (std::log(2.0) * state.epsilon(s));
  }
  return state;
}

double weighted_sum_rate(const ChannelTensor& channels,
                         const BeamformerSet& beams, const ClusterMap& cluster,
                         const arma::vec& sigma2, const arma::vec& mu,
                         const ReceiverSet* receivers, const StreamState* state) {
  ReceiverSet local;
  if (receivers == nullptr) {
    local = mmse_receiver(channels, beams, cluster, sigma2, state);
    receivers = &local;
  }
  double rate = 0.0;
  for (int s = 0; s < cluster.total_streams(); ++s) {
    if (!stream_active(state, s)) continue;
    const int k = cluster.user_of(s);
    const double gamma =
        compute_sinr(channels, beams, *receivers, cluster, sigma2(k), s);
    rate += mu(k) * std::log2(1.0 + gamma);
  }
  return rate;
}

arma::cx_cube link_signals(const ChannelTensor& channels,
                           const BeamformerSet& beams,
                           const ReceiverSet& receivers,
                           const ClusterMap& cluster, const StreamState* state) {
  const int n = cluster.total_streams();
  const int cells = cluster.cells();
  arma::cx_cube y(n, n, cells, arma::fill::zeros);
  for (int r = 0; r < cells; ++r) {
    for (int tx = 0; tx < n; ++tx) {
      if (!stream_active(state, tx)) continue;
      if (!cluster.serves(r, cluster.user_of(tx))) continue;
      const arma::cx_vec m = beams.m.slice(tx).col(r);
      for (int rx = 0; rx < n; ++rx) {
        if (!stream_active(state, rx)) continue;
        const int k_rx = cluster.user_of(rx);
        y(rx, tx, r) =
            arma::cdot(receivers.u.col(rx), channels.H(r, k_rx) * m);
      }
    }
  }
  return y;
}

double per_bs_power(const BeamformerSet& beams, int b) {
  double p = 0.0;
  for (int s = 0; s < beams.total_streams(); ++s)
    p += std::real(arma::cdot(beams.m.slice(s).col(b), beams.m.slice(s).col(b)));
  return p;
}

BeamformerSet matched_filter_init(const ChannelTensor& channels,
                                  const ClusterMap& cluster,
                                  const arma::vec& p_max) {
  const int nt = channels.nt();
  const int cells = cluster.cells();
  const int n = cluster.total_streams();
  BeamformerSet beams;
  beams.m.zeros(nt, cells, n);
  beams.p_max = p_max;

  std::vector<int> load(cells, 0);  // streams carried per BS
  for (int s = 0; s < n; ++s)
    for (int b : cluster.serving[cluster.user_of(s)]) ++load[b];

  for (int s = 0; s < n; ++s) {
    const auto [k, l] = cluster.stream_table[s];
    for (int b : cluster.serving[k]) {
      // Match the l-th receive row of the serving channel.
      arma::cx_vec v = channels.H(b, k).row(l % channels.nr()).t();
      double nv = arma::norm(v, 2);
      if (nv == 0.0) {  // degenerate channel: any feasible direction works
        v.zeros();
        v(0) = 1.0;
        nv = 1.0;
      }
      beams.m.slice(s).col(b) = std::sqrt(p_max(b) / load[b]) * v / nv;
    }
  }
  return beams;
}

}  // namespace jplink
