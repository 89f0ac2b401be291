// SPDX-License-Identifier: Apache-2.0
/**
 * @file pilots.hpp
 * @brief Direct beamformer estimation from bi-directional pilot training.
 *
 * Instead of estimating channels explicitly, stations and users work on
 * composite training observations: uplink pilots precoded with the weighted
 * receive filters give each station R_b = sum_s H_b^H u_s sqrt(w_s) p_s^H + N,
 * and downlink pilots precoded with the transmit beams give each user
 * T_k = sum_s (sum_b H_bk m_bs) g_s^H + N.  All solver quantities (receive
 * filters, best-response / consensus / gradient beamformer updates) are then
 * formed from these matrices alone.  With orthogonal noiseless pilots of
 * length >= the stream count, every update coincides with its explicit-signal
 * counterpart.
 */
#pragma once

#include <armadillo>
#include <optional>
#include <vector>

#include "jplink/rng.hpp"
#include "jplink/sse.hpp"
#include "jplink/system_model.hpp"
#include "jplink/wmmse.hpp"

namespace jplink {

/// Uplink and downlink pilot sequences, one length-S column per stream.
/// Every sequence has squared norm S; orthogonal books are scaled DFT rows,
/// non-orthogonal books are random unit-modulus QPSK sequences.
struct PilotBook {
  arma::cx_mat ul;  ///< S x total_streams
  arma::cx_mat dl;  ///< S x total_streams
  int length = 0;
  bool orthogonal = true;
};

/// Build a pilot book.  Orthogonal books require length >= total_streams.
PilotBook make_pilot_book(int length, int total_streams, bool orthogonal,
                          Rng& rng);

/// Composite training observations.
struct TrainingMatrices {
  arma::field<arma::cx_mat> R;  ///< per station: nt x S
  arma::field<arma::cx_mat> T;  ///< per user: nr x S
  double noise_power = 0.0;
};

/// Uplink training phase: stations observe the weighted receive filters of
/// all active streams through their uplink channels.
arma::field<arma::cx_mat> ul_training(const ChannelTensor& channels,
                                      const ReceiverSet& receivers,
                                      const StreamState& state,
                                      const ClusterMap& cluster,
                                      const PilotBook& book,
                                      double noise_power, Rng& rng);

/// Downlink training phase: users observe the precoded downlink pilots of all
/// active streams.
arma::field<arma::cx_mat> dl_training(const ChannelTensor& channels,
                                      const BeamformerSet& beams,
                                      const StreamState& state,
                                      const ClusterMap& cluster,
                                      const PilotBook& book,
                                      double noise_power, Rng& rng);

/// Receive filters estimated from the downlink training block:
/// u_s = (T_k T_k^H)^{-1} T_k g_s.  Falls back to a trace-scaled ridge on a
/// singular Gram matrix (counted in @p diag).
ReceiverSet de_mmse_receiver(const arma::field<arma::cx_mat>& T,
                             const PilotBook& book, const ClusterMap& cluster,
                             const StreamState& state,
                             Diagnostics* diag = nullptr);

/// Best-response solve for station b in the pilot domain.  @p peer_sums holds
/// c(:, s) = sum over serving j != b of R_j^H m(j, s) as delivered by the
/// exchange.
BisectionResult de_br_solve(const arma::cx_mat& R_b, const PilotBook& book,
                            const StreamState& state, const ClusterMap& cluster,
                            const arma::cx_mat& peer_sums, int b, double p_max,
                            const BisectionSpec& spec = {});

/// Consensus state in the pilot domain: one length-S vector per stream.
struct DeAdmmState {
  double rho = 3.0;
  double beta_dual = 1.0 / 3.0;  ///< dual step (1/rho by default)
  arma::cx_mat s_bar;            ///< S x total_streams
  arma::cx_mat lambda_bar;       ///< S x total_streams
};

/// ADMM block solve for station b given penalty targets
/// q(:, s) = peers(:, s) - s_bar(:, s) + lambda_bar(:, s).
BisectionResult de_admm_solve(const arma::cx_mat& R_b, const PilotBook& book,
                              const StreamState& state,
                              const ClusterMap& cluster, const arma::cx_mat& q,
                              double rho, int b, double p_max,
                              const BisectionSpec& spec = {});

/// Consensus/dual refresh from the delivered coherent sums; returns the
/// post-update max consensus residual.
double de_admm_iterate(DeAdmmState& state, const arma::cx_mat& received_sum);

/// Gradient of the pilot-domain least-squares objective (1/S scaling) for
/// station b, stream s: (2/S) R_b (coherent(:, s) - sqrt(w_s) p_s).
arma::cx_vec de_sg_gradient(const arma::cx_mat& R_b, const PilotBook& book,
                            const StreamState& state,
                            const arma::cx_mat& coherent, int b, int s);

/// Streaming form of de_sg_gradient: accumulates one rank-1 term per training
/// symbol, as a receiver would while the pilot block arrives.  Algebraically
/// identical to the batched form.
arma::cx_vec de_sg_gradient_symbolwise(const arma::cx_mat& R_b,
                                       const PilotBook& book,
                                       const StreamState& state,
                                       const arma::cx_mat& coherent, int b,
                                       int s);

/// True iff the pilot-domain least-squares objective matches the weighted
/// sum-MSE objective on the same beams (after removing the beam-independent
/// constants), to @p tol relative.  Holds exactly for orthogonal noiseless
/// pilots.
bool ls_wmmse_equivalence_check(const ChannelTensor& channels,
                                const BeamformerSet& beams,
                                const ReceiverSet& receivers,
                                const StreamState& state,
                                const ClusterMap& cluster,
                                const arma::field<arma::cx_mat>& R,
                                const PilotBook& book, double tol = 1e-8);

enum class DeAlgorithm { best_response, admm, stochastic_gradient };

struct DeOptions {
  DeAlgorithm algorithm = DeAlgorithm::best_response;
  ExchangeScheme exchange = ExchangeScheme::backhaul_offload;
  double alpha = 0.5;       ///< best-response regulated step
  double rho = 3.0;
  double beta_dual = -1.0;  ///< <= 0: default to 1/rho
  double sg_alpha = 1e-2;
  double sg_beta = 1e-2;
  double omega = 0.5;
  bool normalize = true;
  bool momentum = true;
  SgPowerMode power_mode = SgPowerMode::dual;
  bool update_receivers = true;
  bool refresh_weights = true;
  double pilot_noise_power = 0.0;
  int q_bits = 0;
  double smoothing_beta = 1.0;
  BisectionSpec bisection;
};

/// One-iteration driver of the pilot-domain schemes; mirrors SseStepper.
class DeStepper {
 public:
  DeStepper(ClusterMap cluster, arma::vec p_max, arma::vec sigma2, arma::vec mu,
            BeamformerSet init_beams, PilotBook book, DeOptions options,
            Rng noise_rng);

  void step(const ChannelTensor& channels,
            std::optional<bool> refresh_weights = std::nullopt);

  const BeamformerSet& beams() const { return beams_; }
  const ReceiverSet& receivers() const { return receivers_; }
  const StreamState& state() const { return state_; }
  StreamState& state() { return state_; }
  const BackhaulLedger& ledger() const { return ledger_; }
  const PilotBook& book() const { return book_; }

  double consensus_residual() const { return consensus_residual_; }
  double gradient_norm() const { return gradient_norm_; }
  long long saturation_events() const;
  long long take_saturation_delta();

  void apply_active_flags(const std::vector<char>& active);
  void reset(const ChannelTensor& channels);
  void decay_quantizer_ranges(double factor = 0.99);

 private:
  void ensure_init(const ChannelTensor& channels);
  void receive_side_update(const ChannelTensor& channels, bool refresh_weights);
  arma::cx_cube deliver(const arma::cx_cube& contributions);

  ClusterMap cluster_;
  arma::vec sigma2_, mu_;
  PilotBook book_;
  DeOptions options_;
  BeamformerSet beams_;
  ReceiverSet receivers_;
  StreamState state_;
  DeAdmmState admm_;
  SgState sg_;
  arma::field<arma::cx_mat> R_;  ///< latest uplink training observations
  arma::cx_cube delivered_ul_;   ///< last exchanged coherent sums (consensus)
  Rng noise_rng_;
  std::vector<QuantizerState> links_;
  BackhaulLedger ledger_;
  double consensus_residual_ = 0.0;
  double gradient_norm_ = 0.0;
  long long saturation_mark_ = 0;
  bool initialized_ = false;
};

/// Convergence runner on a static channel.
SseTrace run_de(const ChannelTensor& channels, const ClusterMap& cluster,
                const arma::vec& p_max, const arma::vec& sigma2,
                const arma::vec& mu, const BeamformerSet& init_beams,
                const PilotBook& book, const DeOptions& options, int iters,
                Rng noise_rng);

}  // namespace jplink
