// SPDX-License-Identifier: Apache-2.0
// Serving clusters and the per-stream MSE / SINR / rate calculus.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <stdexcept>

#include "jplink/rng.hpp"
#include "jplink/system_model.hpp"

using namespace jplink;

namespace {

ChannelTensor random_channels(int cells, int users, int nr, int nt, Rng& rng) {
  ChannelTensor ch;
  ch.H.set_size(cells, users);
  for (int b = 0; b < cells; ++b)
    for (int k = 0; k < users; ++k) ch.H(b, k) = rng.cgaussian_mat(nr, nt);
  return ch;
}

/// 1 BS, 1 user, 1 antenna each, h = m = 1: every quantity is hand-computable.
struct ScalarInstance {
  ChannelTensor ch;
  BeamformerSet beams;
  ClusterMap cluster;
  arma::vec sigma2{arma::vec{1.0}};
  arma::vec mu{arma::vec{1.0}};

  ScalarInstance() {
    ch.H.set_size(1, 1);
    ch.H(0, 0) = arma::cx_mat(1, 1, arma::fill::ones);
    cluster = make_full_cooperation(1, 1, 1);
    beams.m.set_size(1, 1, 1);
    beams.m(0, 0, 0) = 1.0;
    beams.p_max = arma::vec{1.0};
  }
};

}  // namespace

TEST_CASE("full-cooperation cluster bookkeeping") {
  const ClusterMap cluster = make_full_cooperation(2, 3, 2);
  CHECK(cluster.cells() == 2);
  CHECK(cluster.users() == 3);
  CHECK(cluster.total_streams() == 6);
  for (int k = 0; k < 3; ++k) {
    REQUIRE(cluster.serving[k].size() == 2);
    CHECK(cluster.streams[k] == 2);
  }
  CHECK(cluster.served[0].size() == 3);
  CHECK(cluster.stream_offset[1] == 2);
  CHECK(cluster.stream_id(1, 1) == 3);
  CHECK(cluster.user_of(3) == 1);
  CHECK(cluster.stream_table[3].second == 1);
  CHECK(cluster.serves(0, 2));
  CHECK(cluster.serves(1, 0));
}

TEST_CASE("per-cell cluster serves only home users (cell-major numbering)") {
  const ClusterMap cluster = make_per_cell(2, 2, 1);
  CHECK(cluster.users() == 4);
  CHECK(cluster.total_streams() == 4);
  REQUIRE(cluster.serving[2].size() == 1);
  CHECK(cluster.serving[2][0] == 1);
  CHECK(cluster.served[0].size() == 2);
  CHECK(cluster.served[1][0] == 2);
  CHECK(cluster.serves(1, 2));
  CHECK(!cluster.serves(0, 2));
}

TEST_CASE("scalar link: closed-form MMSE receiver, MSE, SINR, and weights") {
  ScalarInstance inst;
  StreamState state = make_stream_state(inst.cluster, inst.mu, inst.sigma2);
  CHECK(state.epsilon(0) == doctest::Approx(1.0));
  CHECK(state.weight(0) == doctest::Approx(1.0 / std::log(2.0)));
  CHECK(state.active[0] == 1);

  const ReceiverSet rx =
      mmse_receiver(inst.ch, inst.beams, inst.cluster, inst.sigma2, &state);
  CHECK(rx.u(0, 0).real() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rx.u(0, 0).imag() == doctest::Approx(0.0).epsilon(1e-12));

  const double eps =
      compute_mse(inst.ch, inst.beams, rx, inst.cluster, 1.0, 0);
  CHECK(eps == doctest::Approx(0.5).epsilon(1e-12));
  const double gamma =
      compute_sinr(inst.ch, inst.beams, rx, inst.cluster, 1.0, 0);
  CHECK(gamma == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mse_sinr_check(eps, gamma));

  state.epsilon(0) = 0.5;
  state = update_weights(std::move(state), inst.mu, inst.cluster);
  CHECK(state.weight(0) == doctest::Approx(2.0 / std::log(2.0)));
  state.epsilon(0) = 0.25;
  state = update_weights(std::move(state), inst.mu, inst.cluster);
  CHECK(state.weight(0) == doctest::Approx(4.0 / std::log(2.0)).epsilon(1e-9));
  CHECK(state.weight(0) == doctest::Approx(5.7708).epsilon(1e-4));
}

TEST_CASE("two interference-free streams at SINR 3 give sum rate 4") {
  ChannelTensor ch;
  ch.H.set_size(1, 2);
  ch.H(0, 0).zeros(1, 2);
  ch.H(0, 0)(0, 0) = 1.0;
  ch.H(0, 1).zeros(1, 2);
  ch.H(0, 1)(0, 1) = 1.0;
  const ClusterMap cluster = make_full_cooperation(1, 2, 1);
  BeamformerSet beams;
  beams.m.set_size(2, 1, 2);
  beams.m.zeros();
  beams.m(0, 0, 0) = std::sqrt(3.0);
  beams.m(1, 0, 1) = std::sqrt(3.0);
  beams.p_max = arma::vec{6.0};
  const arma::vec sigma2{1.0, 1.0};
  const arma::vec mu{1.0, 1.0};

  CHECK(per_bs_power(beams, 0) == doctest::Approx(6.0));
  const ReceiverSet rx = mmse_receiver(ch, beams, cluster, sigma2);
  for (int s = 0; s < 2; ++s)
    CHECK(compute_sinr(ch, beams, rx, cluster, 1.0, s) ==
          doctest::Approx(3.0).epsilon(1e-12));
  CHECK(weighted_sum_rate(ch, beams, cluster, sigma2, mu) ==
        doctest::Approx(4.0).epsilon(1e-12));

  // Suboptimal fixed receivers with a cross term: hand-evaluated MSE.
  ReceiverSet unit;
  unit.u = arma::cx_mat(1, 2, arma::fill::ones);
  const double eps0 = compute_mse(ch, beams, unit, cluster, 1.0, 0);
  const double expect = std::pow(std::sqrt(3.0) - 1.0, 2) + 1.0;
  CHECK(eps0 == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("effective channel is the coherent serving sum") {
  Rng rng(31);
  const ChannelTensor ch = random_channels(2, 1, 2, 3, rng);
  const ClusterMap cluster = make_full_cooperation(2, 1, 1);
  BeamformerSet beams;
  beams.m.set_size(3, 2, 1);
  beams.m.slice(0) = rng.cgaussian_mat(3, 2);
  beams.p_max = arma::vec{10.0, 10.0};
  const arma::cx_vec expect =
      ch.H(0, 0) * beams.m.slice(0).col(0) + ch.H(1, 0) * beams.m.slice(0).col(1);
  const arma::cx_vec got = effective_channel(ch, beams, cluster, 0, 0);
  CHECK(arma::abs(got - expect).max() < 1e-14);
}

TEST_CASE("MSE-SINR inversion holds for MMSE receivers on random instances") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const int cells = 1 + static_cast<int>(rng.next_u64() % 3);
    const int users = 1 + static_cast<int>(rng.next_u64() % 4);
    const int nt = 1 + static_cast<int>(rng.next_u64() % 3);
    const int nr = 1 + static_cast<int>(rng.next_u64() % 2);
    const ChannelTensor ch = random_channels(cells, users, nr, nt, rng);
    const ClusterMap cluster = make_full_cooperation(cells, users, 1);
    const arma::vec p_max(cells, arma::fill::ones);
    const BeamformerSet beams = matched_filter_init(ch, cluster, p_max);
    const double s2 = 0.1 + rng.uniform();
    const arma::vec sigma2(users, arma::fill::value(s2));
    const ReceiverSet rx = mmse_receiver(ch, beams, cluster, sigma2);
    for (int s = 0; s < cluster.total_streams(); ++s) {
      const double eps = compute_mse(ch, beams, rx, cluster, s2, s);
      const double gamma = compute_sinr(ch, beams, rx, cluster, s2, s);
      CHECK(std::abs(1.0 / eps - (1.0 + gamma)) <= 1e-9 * (1.0 + gamma));
    }
  }
}

TEST_CASE("MMSE receivers maximize SINR among tried alternatives") {
  Rng rng(99);
  const ChannelTensor ch = random_channels(2, 3, 2, 2, rng);
  const ClusterMap cluster = make_full_cooperation(2, 3, 1);
  const arma::vec p_max(2, arma::fill::ones);
  const BeamformerSet beams = matched_filter_init(ch, cluster, p_max);
  const arma::vec sigma2(3, arma::fill::value(0.5));
  const ReceiverSet best = mmse_receiver(ch, beams, cluster, sigma2);
  for (int trial = 0; trial < 20; ++trial) {
    ReceiverSet other;
    other.u = rng.cgaussian_mat(2, cluster.total_streams());
    for (int s = 0; s < cluster.total_streams(); ++s) {
      const double g_best = compute_sinr(ch, beams, best, cluster, 0.5, s);
      const double g_other = compute_sinr(ch, beams, other, cluster, 0.5, s);
      CHECK(g_best >= g_other - 1e-10);
    }
  }
}

TEST_CASE("dead streams report zero SINR and rate") {
  ScalarInstance inst;
  inst.beams.m.zeros();
  const ReceiverSet rx =
      mmse_receiver(inst.ch, inst.beams, inst.cluster, arma::vec{0.0});
  CHECK(compute_sinr(inst.ch, inst.beams, rx, inst.cluster, 0.0, 0) == 0.0);
  CHECK(weighted_sum_rate(inst.ch, inst.beams, inst.cluster, arma::vec{0.0},
                          inst.mu) == 0.0);
}

TEST_CASE("weight update rejects non-positive MSE and zeroes inactive streams") {
  ScalarInstance inst;
  StreamState state = make_stream_state(inst.cluster, inst.mu, inst.sigma2);
  state.epsilon(0) = 0.0;
  CHECK_THROWS_AS(update_weights(state, inst.mu, inst.cluster),
                  std::domain_error);
  state.epsilon(0) = -0.1;
  CHECK_THROWS_AS(update_weights(state, inst.mu, inst.cluster),
                  std::domain_error);
  state.epsilon(0) = -0.1;
  state.active[0] = 0;
  state = update_weights(std::move(state), inst.mu, inst.cluster);
  CHECK(state.weight(0) == 0.0);
}

TEST_CASE("singular receive covariance falls back to a counted ridge") {
  ChannelTensor ch;
  ch.H.set_size(1, 1);
  ch.H(0, 0).zeros(2, 1);  // 2x1, rank-1 covariance
  ch.H(0, 0)(0, 0) = 1.0;
  const ClusterMap cluster = make_full_cooperation(1, 1, 1);
  BeamformerSet beams;
  beams.m.set_size(1, 1, 1);
  beams.m(0, 0, 0) = 1.0;
  beams.p_max = arma::vec{1.0};
  Diagnostics diag;
  const ReceiverSet rx =
      mmse_receiver(ch, beams, cluster, arma::vec{0.0}, nullptr, &diag);
  CHECK(diag.regularized_solves >= 1);
  CHECK(rx.u.is_finite());
  CHECK(std::abs(rx.u(0, 0)) > 0.0);
}

TEST_CASE("matched-filter start spends exactly the station budget") {
  Rng rng(55);
  const ChannelTensor ch = random_channels(2, 3, 2, 3, rng);
  const ClusterMap cluster = make_full_cooperation(2, 3, 2);
  const arma::vec p_max{1.5, 2.5};
  const BeamformerSet beams = matched_filter_init(ch, cluster, p_max);
  for (int b = 0; b < 2; ++b)
    CHECK(per_bs_power(beams, b) == doctest::Approx(p_max(b)).epsilon(1e-12));
  // Each serving beam is collinear with the conjugated top receive row of its
  // link (Cauchy-Schwarz equality).
  for (int s = 0; s < cluster.total_streams(); ++s) {
    const int k = cluster.user_of(s);
    const int l = s - cluster.stream_offset[k];
    for (int b : cluster.serving[k]) {
      const arma::cx_vec m = beams.m.slice(s).col(b);
      const arma::cx_vec v = ch.H(b, k).row(l % 2).t();
      CHECK(std::abs(arma::cdot(v, m)) ==
            doctest::Approx(arma::norm(m) * arma::norm(v)).epsilon(1e-10));
    }
  }
}

TEST_CASE("link signals vanish for non-serving stations and inactive streams") {
  Rng rng(13);
  const ChannelTensor ch = random_channels(2, 2, 1, 2, rng);
  const ClusterMap cluster = make_per_cell(2, 1, 1);
  const arma::vec p_max(2, arma::fill::ones);
  const BeamformerSet beams = matched_filter_init(ch, cluster, p_max);
  ReceiverSet rx;
  rx.u = arma::cx_mat(1, 2, arma::fill::ones);
  StreamState state =
      make_stream_state(cluster, arma::vec(2, arma::fill::ones),
                        arma::vec(2, arma::fill::ones));
  arma::cx_cube y = link_signals(ch, beams, rx, cluster, &state);
  REQUIRE(y.n_slices == 2);
  // Station 1 does not serve stream 0 and vice versa.
  CHECK(std::abs(y(0, 0, 1)) == 0.0);
  CHECK(std::abs(y(1, 1, 0)) == 0.0);
  CHECK(std::abs(y(0, 0, 0)) > 0.0);
  // Direct recomputation of one entry.
  const std::complex<double> expect =
      arma::cdot(rx.u.col(1), ch.H(1, 1) * beams.m.slice(1).col(1));
  CHECK(std::abs(y(1, 1, 1) - expect) < 1e-14);

  state.active[0] = 0;
  y = link_signals(ch, beams, rx, cluster, &state);
  CHECK(arma::abs(y.slice(0).col(0)).max() == 0.0);  // no tx from stream 0
  CHECK(arma::abs(y.slice(1).col(0)).max() == 0.0);
}

TEST_CASE("scalar link signal equals the receive-filtered beam") {
  ScalarInstance inst;
  ReceiverSet rx;
  rx.u = arma::cx_mat(1, 1);
  rx.u(0, 0) = 0.5;
  const arma::cx_cube y = link_signals(inst.ch, inst.beams, rx, inst.cluster);
  CHECK(y(0, 0, 0).real() == doctest::Approx(0.5));
  CHECK(y(0, 0, 0).imag() == doctest::Approx(0.0));
}
