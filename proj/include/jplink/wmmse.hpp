// SPDX-License-Identifier: Apache-2.0
/**
 * @file wmmse.hpp
 * @brief Centralized weighted-MMSE solver: alternating receiver / weight /
 *        beamformer updates with per-base-station power constraints.
 *
 * The transmit-side convex subproblem (weighted sum-MSE minimization at fixed
 * receivers and weights) is solved by Gauss-Seidel sweeps over base-station
 * blocks.  Each block has a closed-form solution m = (C + nu I)^{-1} p whose
 * power dual nu is located by bisection.
 */
#pragma once

#include <armadillo>
#include <vector>

#include "jplink/system_model.hpp"

namespace jplink {

struct BisectionSpec {
  double dual_lower = 0.0;
  double dual_upper = -1.0;  ///< <= 0: bracket automatically
  double tolerance = 1e-8;   ///< relative power mismatch
  int max_iters = 200;
};

struct BisectionResult {
  double nu = 0.0;         ///< power dual
  arma::cx_mat beams;      ///< nt x n_rhs solution columns
  double power = 0.0;      ///< transmit power at nu
  int iterations = 0;
  bool constrained = false;  ///< true if the budget is tight (nu > 0)
};

/// Solve min sum_s ||.||-quadratics with common Hermitian base:
/// beams(:,s) = (base + nu I)^{-1} rhs(:,s), with nu >= dual_lower chosen so
/// the total power meets p_max (nu = dual_lower if already feasible there).
/// Throws ConvergenceError when max_iters is exhausted.
BisectionResult bisect_power_dual(const arma::cx_mat& base,
                                  const arma::cx_mat& rhs, double p_max,
                                  const BisectionSpec& spec = {});

/// One base station's block of the transmit subproblem at fixed receivers,
/// weights, and other-station beams.
struct LocalBlock {
  arma::cx_mat base;             ///< nt x nt Hermitian quadratic term
  arma::cx_mat rhs;              ///< nt x |streams of b| linear terms
  std::vector<int> stream_ids;   ///< global stream id per rhs column
};

/// Assemble the block problem of base station b.  @p signals must be the
/// link_signals() cube for the current beams.
LocalBlock build_local_block(const ChannelTensor& channels,
                             const ReceiverSet& receivers,
                             const StreamState& state, const ClusterMap& cluster,
                             const arma::cx_cube& signals, int b);

struct SolveReport {
  int sweeps = 0;
  double objective = 0.0;  ///< weighted sum-MSE at exit
  bool converged = false;
};

/// Gauss-Seidel solution of the transmit subproblem; updates @p beams in
/// place.  Stops on relative objective change <= tol or after max_sweeps.
SolveReport solve_transmit_subproblem(const ChannelTensor& channels,
                                      BeamformerSet& beams,
                                      const ReceiverSet& receivers,
                                      const StreamState& state,
                                      const ClusterMap& cluster,
                                      int max_sweeps = 50, double tol = 1e-8,
                                      const BisectionSpec& spec = {});

/// Weighted sum-MSE objective sum_s w_s eps_s over active streams.
double weighted_sum_mse(const ChannelTensor& channels, const BeamformerSet& beams,
                        const ReceiverSet& receivers, const StreamState& state,
                        const ClusterMap& cluster);

struct WmmseResult {
  BeamformerSet beams;
  ReceiverSet receivers;
  arma::vec objective_trace;  ///< weighted sum rate after each outer iteration
};

/// Full centralized alternating optimization from a matched-filter start.
WmmseResult run_centralized(const ChannelTensor& channels,
                            const ClusterMap& cluster, const arma::vec& p_max,
                            const arma::vec& sigma2, const arma::vec& mu,
                            int iters);

}  // namespace jplink
