// SPDX-License-Identifier: Apache-2.0
#include "jplink/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace jplink {

Layout build_wraparound_layout(int cells, int users_per_cell, double isd_m,
                               double pathloss_exponent) {
  if (cells != 1 && cells != 7)
    throw std::invalid_argument("layout supports 1 or 7 cells, got " +
                                std::to_string(cells));
  if (users_per_cell < 1)
    throw std::invalid_argument("users_per_cell must be >= 1");
  if (isd_m <= 0.0) throw std::invalid_argument("inter-site distance must be > 0");

  Layout layout;
  layout.cells = cells;
  layout.users_per_cell = users_per_cell;
  layout.isd_m = isd_m;
  layout.pathloss_exponent = pathloss_exponent;

  layout.bs_xy.set_size(cells, 2);
  layout.bs_xy.row(0) = arma::rowvec{0.0, 0.0};
  for (int b = 1; b < cells; ++b) {
    const double ang = (b - 1) * M_PI / 3.0;
    layout.bs_xy.row(b) = arma::rowvec{isd_m * std::cos(ang), isd_m * std::sin(ang)};
  }

  // Cell-edge users on a circle of radius isd/2, evenly spaced from angle 0.
  const double radius = isd_m / 2.0;
  layout.ue_xy.set_size(cells * users_per_cell, 2);
  for (int b = 0; b < cells; ++b) {
    for (int j = 0; j < users_per_cell; ++j) {
      const double ang = 2.0 * M_PI * j / users_per_cell;
      layout.ue_xy.row(b * users_per_cell + j) =
          layout.bs_xy.row(b) +
          arma::rowvec{radius * std::cos(ang), radius * std::sin(ang)};
    }
  }

  if (cells == 7) {
    // Translation vectors of the 7-cell cluster lattice; all have length
    // sqrt(7)*isd.  The 7 images are the identity plus the six neighbours
    // +-t1, +-t2, +-(t1 - t2).
    const arma::rowvec t1{2.5 * isd_m, std::sqrt(3.0) / 2.0 * isd_m};
    const arma::rowvec t2{0.5 * isd_m, 3.0 * std::sqrt(3.0) / 2.0 * isd_m};
    layout.wrap_offsets.set_size(7, 2);
    layout.wrap_offsets.row(0).zeros();
    layout.wrap_offsets.row(1) = t1;
    layout.wrap_offsets.row(2) = -t1;
    layout.wrap_offsets.row(3) = t2;
    layout.wrap_offsets.row(4) = -t2;
    layout.wrap_offsets.row(5) = t1 - t2;
    layout.wrap_offsets.row(6) = t2 - t1;
  } else {
    layout.wrap_offsets.set_size(1, 2);
    layout.wrap_offsets.zeros();
  }
  return layout;
}

double wrap_distance(const Layout& layout, int b, int k) {
  const arma::rowvec bs = layout.bs_xy.row(b);
  const arma::rowvec ue = layout.ue_xy.row(k);
  double best = arma::datum::inf;
  for (arma::uword i = 0; i < layout.wrap_offsets.n_rows; ++i) {
    const double d = arma::norm(bs - (ue + layout.wrap_offsets.row(i)), 2);
    best = std::min(best, d);
  }
  return best;
}

double path_gain(double distance_m, double exponent) {
  if (distance_m <= 0.0) throw std::invalid_argument("distance must be > 0");
  return std::pow(distance_m, -exponent);
}

arma::mat path_gain_matrix(const Layout& layout) {
  arma::mat gain(layout.cells, layout.users());
  for (int b = 0; b < layout.cells; ++b)
    for (int k = 0; k < layout.users(); ++k)
      gain(b, k) = path_gain(wrap_distance(layout, b, k), layout.pathloss_exponent);
  return gain;
}

double noise_power(double snr_linear, double p_max, double edge_gain) {
  if (snr_linear <= 0.0) throw std::invalid_argument("SNR must be > 0");
  return edge_gain * p_max / snr_linear;
}

}  // namespace jplink
