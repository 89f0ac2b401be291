// SPDX-License-Identifier: Apache-2.0
/**
 * @file sse.hpp
 * @brief Decentralized beamformer coordination over exchanged per-stream
 *        signal estimates.
 *
 * All three schemes iterate on the same currency: the complex scalars
 * y(rx, tx, b) = u_rx^H H(b) m(b, tx) each base station contributes to every
 * coherently received stream.  Best response solves regulated per-station
 * subproblems against the latest exchanged scalars; ADMM runs consensus over
 * the aggregated received signals with scaled duals; the stochastic gradient
 * scheme descends the sum-MSE objective with optional momentum, step
 * normalization, and a power-constraint dual.
 */
#pragma once

#include <armadillo>
#include <optional>
#include <vector>

#include "jplink/signaling.hpp"
#include "jplink/system_model.hpp"
#include "jplink/wmmse.hpp"

namespace jplink {

enum class SseAlgorithm { best_response, admm, stochastic_gradient };
enum class SgPowerMode { dual, projection };

struct BrState {
  double alpha = 0.5;  ///< regulated update step
};

/// Consensus state over aggregated received per-stream signals, indexed
/// (receiving stream, transmitted stream).
struct AdmmState {
  double rho = 3.0;
  arma::cx_mat s_bar;
  arma::cx_mat lambda_bar;
};

struct SgState {
  double alpha = 1e-2;     ///< gradient step
  double beta_dual = 1e-2; ///< power-dual ascent step
  double omega = 0.5;      ///< momentum factor
  bool normalize = true;   ///< scale step by 1/||G_s||^2 per stream
  bool momentum = true;
  SgPowerMode power_mode = SgPowerMode::dual;
  arma::vec nu;            ///< per-BS power dual
  arma::cx_cube momentum_buf;
};

/// Coupling of the cooperating stations' beams at station b:
/// c(rx, tx) = sum over serving r != b of y(rx, tx, r).
arma::cx_mat br_fixed_terms(const ClusterMap& cluster, const StreamState& state,
                            const arma::cx_cube& signals, int b);

/// Best-response block solve for station b (closed form plus power-dual
/// bisection) against the exchanged signals.
BisectionResult br_local_solve(const ChannelTensor& channels,
                               const ReceiverSet& receivers,
                               const StreamState& state,
                               const ClusterMap& cluster,
                               const arma::cx_cube& signals, int b,
                               double p_max, const BisectionSpec& spec = {});

/// Regulated combination m <- m + alpha (m_new - m_old) for station b's
/// columns listed in stream_ids.
void regulated_update(BeamformerSet& beams, int b,
                      const std::vector<int>& stream_ids,
                      const arma::cx_mat& solution, double alpha);

/// Consensus update s_bar = rho/(1+rho) (received + lambda_bar), elementwise.
arma::cx_mat admm_s_update(const arma::cx_mat& received,
                           const arma::cx_mat& lambda_bar, double rho);

/// Scaled dual ascent lambda_bar <- lambda_bar + received - s_bar.
arma::cx_mat admm_dual_update(const arma::cx_mat& lambda_bar,
                              const arma::cx_mat& received,
                              const arma::cx_mat& s_bar);

/// ADMM block solve for station b given the penalty targets
/// q(rx, tx) = peers(rx, tx) - s_bar(rx, tx) + lambda_bar(rx, tx), where
/// peers excludes b's own contribution.
BisectionResult admm_local_solve(const ChannelTensor& channels,
                                 const ReceiverSet& receivers,
                                 const StreamState& state,
                                 const ClusterMap& cluster,
                                 const arma::cx_mat& q_peers, double rho, int b,
                                 double p_max, const BisectionSpec& spec = {});

/// Reconstruction of the eliminated per-station consensus variables from the
/// aggregated state, used to audit the aggregation identity.
struct ConsensusSplit {
  arma::cx_cube per_bs_s;       ///< (rx, tx, cells)
  arma::cx_cube a_terms;        ///< (rx, tx, cells)
  arma::cx_cube lambda_terms;   ///< (rx, tx, cells)
};

/// Rebuild the per-station split implied by equal dual sharing:
/// lambda_b = lambda_bar/|serving|, a_b = lambda_b + contribution_b,
/// s_b = a_b + (s_bar - lambda_bar - received)/|serving|.
ConsensusSplit reconstruct_consensus_split(const arma::cx_cube& contributions,
                                           const arma::cx_mat& s_bar,
                                           const arma::cx_mat& lambda_bar,
                                           const ClusterMap& cluster,
                                           const StreamState& state);

/// True iff the per-station consensus variables sum to the aggregate within
/// tol and the implied next per-station duals agree across stations, i.e. the
/// aggregated recursion loses no information.
bool consensus_split_check(const ConsensusSplit& split,
                           const arma::cx_mat& s_bar,
                           const ClusterMap& cluster, const StreamState& state,
                           double tol = 1e-12);

/// Gradient of the sum-MSE objective with respect to station b's beamformer
/// of stream s, at the exchanged coherent signals A(rx, tx) =
/// sum_g sqrt(w_rx) y(rx, tx, g).
arma::cx_vec sg_gradient(const ChannelTensor& channels,
                         const ReceiverSet& receivers, const StreamState& state,
                         const ClusterMap& cluster,
                         const arma::cx_mat& coherent, int b, int s);

/// Scale any station exceeding its budget back to the power sphere.
void feasible_projection(BeamformerSet& beams);

struct SseOptions {
  SseAlgorithm algorithm = SseAlgorithm::best_response;
  ExchangeScheme exchange = ExchangeScheme::backhaul_offload;
  double alpha = 0.5;        ///< best-response regulated step
  double rho = 3.0;
  double sg_alpha = 1e-2;
  double sg_beta = 1e-2;
  double omega = 0.5;
  bool normalize = true;
  bool momentum = true;
  SgPowerMode power_mode = SgPowerMode::dual;
  bool update_receivers = true;  ///< false freezes receivers and weights
  bool refresh_weights = true;   ///< default weight cadence (see step())
  int q_bits = 0;                ///< quantize exchanged scalars when > 0
  double smoothing_beta = 1.0;
  BisectionSpec bisection;
};

/// One-iteration driver shared by the convergence runners and the framed
/// scenario loop.  Holds all persistent algorithm state.
class SseStepper {
 public:
  SseStepper(ClusterMap cluster, arma::vec p_max, arma::vec sigma2,
             arma::vec mu, BeamformerSet init_beams, SseOptions options);

  /// Run one algorithm iteration (one exchange round) on the given channel.
  /// @p refresh_weights overrides the per-iteration weight update, allowing
  /// frame-based schedules to freeze weights between frame boundaries.
  void step(const ChannelTensor& channels,
            std::optional<bool> refresh_weights = std::nullopt);

  const BeamformerSet& beams() const { return beams_; }
  BeamformerSet& beams() { return beams_; }
  const ReceiverSet& receivers() const { return receivers_; }
  const StreamState& state() const { return state_; }
  StreamState& state() { return state_; }
  const BackhaulLedger& ledger() const { return ledger_; }
  const ClusterMap& cluster() const { return cluster_; }

  double consensus_residual() const { return consensus_residual_; }
  double gradient_norm() const { return gradient_norm_; }
  long long saturation_events() const;
  /// Saturations accumulated since the previous call.
  long long take_saturation_delta();
  bool last_split_ok() const { return last_split_ok_; }

  /// Zero the beams of streams flagged inactive and refresh weights.
  void apply_active_flags(const std::vector<char>& active);
  /// Re-seed training from scratch (stream re-admission).
  void reset(const ChannelTensor& channels);
  void decay_quantizer_ranges(double factor = 0.99);

 private:
  void ensure_init(const ChannelTensor& channels);
  void update_receivers_and_weights(const ChannelTensor& channels,
                                    bool refresh_weights);
  arma::cx_cube deliver(const arma::cx_cube& signals);
  void step_br(const ChannelTensor& channels, bool refresh_weights);
  void step_admm(const ChannelTensor& channels, bool refresh_weights);
  void step_sg(const ChannelTensor& channels, bool refresh_weights);

  ClusterMap cluster_;
  arma::vec sigma2_, mu_;
  SseOptions options_;
  BeamformerSet beams_;
  ReceiverSet receivers_;
  StreamState state_;
  BrState br_;
  AdmmState admm_;
  SgState sg_;
  // Exchange state: official delivered contributions and their coherent sum.
  arma::cx_cube delivered_contrib_;
  arma::cx_mat received_sum_;
  std::vector<QuantizerState> links_;
  BackhaulLedger ledger_;
  double consensus_residual_ = 0.0;
  double gradient_norm_ = 0.0;
  long long saturation_mark_ = 0;
  bool last_split_ok_ = true;
  bool initialized_ = false;
};

struct SseTrace {
  arma::vec sum_rate;
  arma::mat per_bs_power;       ///< iterations x cells
  arma::vec consensus_residual;
  arma::vec gradient_norm;
  std::vector<char> split_ok;   ///< aggregation identity audit per iteration
  BackhaulLedger ledger;
};

/// Convergence runner on a static channel.
SseTrace run_sse(const ChannelTensor& channels, const ClusterMap& cluster,
                 const arma::vec& p_max, const arma::vec& sigma2,
                 const arma::vec& mu, const BeamformerSet& init_beams,
                 const SseOptions& options, int iters);

}  // namespace jplink
