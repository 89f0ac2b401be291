// SPDX-License-Identifier: Apache-2.0
/**
 * @file fading.hpp
 * @brief Time-correlated Rayleigh fading with the classical U-shaped Doppler
 *        spectrum.
 *
 * Each channel entry is a sum of 16 complex sinusoids with independent random
 * arrival angles and phases.  The ensemble autocorrelation across frames is
 * J0(2*pi*fd_norm*lag), where fd_norm is the Doppler frequency normalized to
 * the frame (signaling) rate.  fd_norm = 0 yields a static channel.
 */
#pragma once

#include <armadillo>
#include <vector>

#include "jplink/rng.hpp"

namespace jplink {

/// Channels of one frame: H(b, k) is the nr x nt matrix from base station b
/// to user k, including the distance-law gain.
struct ChannelTensor {
  arma::field<arma::cx_mat> H;

  int cells() const { return static_cast<int>(H.n_rows); }
  int users() const { return static_cast<int>(H.n_cols); }
  int nr() const { return static_cast<int>(H(0, 0).n_rows); }
  int nt() const { return static_cast<int>(H(0, 0).n_cols); }
};

class FadingProcess {
 public:
  static constexpr int kOscillators = 16;

  /// @param gain  cells x users distance-law power gains applied per link.
  FadingProcess(int cells, int users, int nr, int nt, double normalized_doppler,
                const arma::mat& gain, Rng rng);

  /// Channel realization at an absolute frame index (stateless evaluation).
  ChannelTensor at(long frame) const;

  /// Realizations for frames [0, frames); also advances the internal index.
  std::vector<ChannelTensor> evolve(long frames);

  double normalized_doppler() const { return normalized_doppler_; }
  long time_index() const { return time_index_; }

 private:
  int cells_, users_, nr_, nt_;
  double normalized_doppler_;
  arma::mat gain_;
  long time_index_ = 0;
  // Flattened (entry, oscillator) parameter tables.
  arma::mat cos_angles_;  ///< cos of arrival angle per oscillator
  arma::mat phases_;      ///< initial phase per oscillator
};

}  // namespace jplink
