// SPDX-License-Identifier: Apache-2.0
/**
 * @file system_model.hpp
 * @brief Serving clusters, beamformer/receiver containers, and the per-stream
 *        MSE / SINR / rate calculus for coherent joint transmission.
 *
 * Streams are enumerated user-major: stream s of the system is stream l of
 * user k with s = offset(k) + l.  A stream is served coherently by every base
 * station in its user's serving set; beamformers of non-serving base stations
 * are identically zero.
 */
#pragma once

#include <armadillo>
#include <utility>
#include <vector>

#include "jplink/common.hpp"
#include "jplink/fading.hpp"

namespace jplink {

/// Serving relationships: which base stations serve which users, and how many
/// streams each user carries.
struct ClusterMap {
  std::vector<std::vector<int>> serving;  ///< serving[k]: BSs serving user k
  std::vector<std::vector<int>> served;   ///< served[b]: users served by BS b
  std::vector<int> streams;               ///< streams per user
  std::vector<std::pair<int, int>> stream_table;  ///< s -> (k, l)
  std::vector<int> stream_offset;         ///< first stream id of user k

  int users() const { return static_cast<int>(serving.size()); }
  int cells() const { return static_cast<int>(served.size()); }
  int total_streams() const { return static_cast<int>(stream_table.size()); }
  int stream_id(int k, int l) const { return stream_offset[k] + l; }
  int user_of(int s) const { return stream_table[s].first; }
  bool serves(int b, int k) const;
};

/// All base stations serve all users.
ClusterMap make_full_cooperation(int cells, int users, int streams_per_user);
/// Each user is served only by its home base station (users cell-major).
ClusterMap make_per_cell(int cells, int users_per_cell, int streams_per_user);

/// Transmit beamformers m(:, b, s) with per-BS power budgets.  Entries for
/// non-serving (b, s) pairs are zero.
struct BeamformerSet {
  arma::cx_cube m;  ///< nt x cells x total_streams
  arma::vec p_max;  ///< per-BS power budget

  int nt() const { return static_cast<int>(m.n_rows); }
  int cells() const { return static_cast<int>(m.n_cols); }
  int total_streams() const { return static_cast<int>(m.n_slices); }
};

/// Receive filters u(:, s), one per stream.
struct ReceiverSet {
  arma::cx_mat u;  ///< nr x total_streams
};

/// Per-stream solver state: MSE values, MSE weights, rate priorities, noise
/// powers, and the active flags maintained by stream admission.
struct StreamState {
  arma::vec epsilon;        ///< per-stream MSE
  arma::vec weight;         ///< per-stream MSE weight
  arma::vec mu;             ///< per-user rate priority
  arma::vec sigma2;         ///< per-user noise power
  std::vector<char> active; ///< per-stream admission flag
};

/// Fresh state with epsilon = 1, weight = mu/ln2, all streams active.
StreamState make_stream_state(const ClusterMap& cluster, const arma::vec& mu,
                              const arma::vec& sigma2);

/// Coherently combined downlink channel of stream s as seen at user k:
/// sum over serving BSs of H(b,k) * m(b,s).
arma::cx_vec effective_channel(const ChannelTensor& channels,
                               const BeamformerSet& beams,
                               const ClusterMap& cluster, int k, int s);

/// Receive SINR of stream s (its user's receiver u_s).  A stream with zero
/// signal and zero interference+noise reports 0.
double compute_sinr(const ChannelTensor& channels, const BeamformerSet& beams,
                    const ReceiverSet& receivers, const ClusterMap& cluster,
                    double sigma2, int s);

/// Per-stream MSE for the given receive filter.
double compute_mse(const ChannelTensor& channels, const BeamformerSet& beams,
                   const ReceiverSet& receivers, const ClusterMap& cluster,
                   double sigma2, int s);

/// MMSE receive filters for all active streams (inactive streams get zero
/// filters).  A singular receive covariance (possible when sigma2 = 0) falls
/// back to a trace-scaled ridge and is counted in @p diag.
ReceiverSet mmse_receiver(const ChannelTensor& channels,
                          const BeamformerSet& beams, const ClusterMap& cluster,
                          const arma::vec& sigma2, const StreamState* state = nullptr,
                          Diagnostics* diag = nullptr);

/// Check the MSE<->SINR inversion identity 1/eps = 1 + gamma for MMSE filters.
bool mse_sinr_check(double epsilon, double gamma, double tol = 1e-9);

/// Rate-optimal MSE weights w = mu / (ln2 * eps).  Throws std::domain_error
/// for non-positive MSE.  Inactive streams get zero weight.
StreamState update_weights(StreamState state, const arma::vec& mu,
                           const ClusterMap& cluster);

/// Priority-weighted sum rate sum_s mu_k * log2(1 + sinr_s) over active
/// streams.  When @p receivers is null, MMSE filters are formed internally.
double weighted_sum_rate(const ChannelTensor& channels,
                         const BeamformerSet& beams, const ClusterMap& cluster,
                         const arma::vec& sigma2, const arma::vec& mu,
                         const ReceiverSet* receivers = nullptr,
                         const StreamState* state = nullptr);

/// Transmit power spent by base station b across its streams.
double per_bs_power(const BeamformerSet& beams, int b);

/// Per base-station link signals y(s_rx, s_tx, r) = u_{s_rx}^H H(r, k_rx) m(r, s_tx):
/// the component of stream s_tx transmitted by BS r as observed through the
/// receive filter of stream s_rx.  Zero when r does not serve s_tx or either
/// stream is inactive.  These scalars are the currency every decentralized
/// scheme exchanges.
arma::cx_cube link_signals(const ChannelTensor& channels,
                           const BeamformerSet& beams,
                           const ReceiverSet& receivers,
                           const ClusterMap& cluster,
                           const StreamState* state = nullptr);

/// Matched-filter initialization: each serving beam points along the top
/// receive row of its channel and every base station splits its budget
/// equally across its streams.
BeamformerSet matched_filter_init(const ChannelTensor& channels,
                                  const ClusterMap& cluster,
                                  const arma::vec& p_max);

}  // namespace jplink
