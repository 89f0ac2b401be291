// SPDX-License-Identifier: Apache-2.0
/**
 * @file geometry.hpp
 * @brief Hexagonal multi-cell layout with wrap-around distances.
 *
 * The layout places one central base station plus (optionally) a ring of six
 * neighbours at the inter-site distance.  Users sit on the cell edge, evenly
 * spaced on a circle of half the inter-site distance around their home base
 * station.  Distances are evaluated on a 7-cell torus: each terminal has six
 * mirror images displaced by the cluster translation vectors, and the minimum
 * image distance is used, so no cell sees an artificial interference edge.
 */
#pragma once

#include <armadillo>
#include <vector>

namespace jplink {

struct Layout {
  int cells = 0;            ///< number of base stations (1 or 7)
  int users_per_cell = 0;
  double isd_m = 0.0;       ///< inter-site distance [m]
  double pathloss_exponent = 3.0;
  arma::mat bs_xy;          ///< cells x 2 base-station positions
  arma::mat ue_xy;          ///< (cells*users_per_cell) x 2 user positions
  arma::mat wrap_offsets;   ///< n_images x 2 mirror displacements (row 0 = no wrap)

  int users() const { return cells * users_per_cell; }
  /// Home base station of user k (users are numbered cell-major).
  int home_cell(int k) const { return k / users_per_cell; }
};

/// Build the wrap-around layout.  @p cells must be 1 or 7.
Layout build_wraparound_layout(int cells, int users_per_cell, double isd_m,
                               double pathloss_exponent = 3.0);

/// Minimum-image distance between base station @p b and user @p k [m].
double wrap_distance(const Layout& layout, int b, int k);

/// Distance-law channel gain g = d^(-exponent).
double path_gain(double distance_m, double exponent);

/// cells x users matrix of wrap-around path gains.
arma::mat path_gain_matrix(const Layout& layout);

/// Noise power that realizes a given cell-edge SNR:
/// sigma^2 = edge_gain * p_max / snr_linear.
double noise_power(double snr_linear, double p_max, double edge_gain);

}  // namespace jplink
