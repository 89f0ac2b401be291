// SPDX-License-Identifier: Apache-2.0
// Pilot-domain training: recovery identities, solver equivalences, lockstep.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "jplink/pilots.hpp"
#include "jplink/rng.hpp"
#include "jplink/sse.hpp"
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

/// Instance with ready receive filters and rate-optimal weights.
struct PreparedInstance {
  ChannelTensor ch;
  ClusterMap cluster;
  arma::vec p_max, sigma2, mu;
  BeamformerSet beams;
  ReceiverSet rx;
  StreamState state;

  PreparedInstance(int cells, int users, int nr, int nt, double noise, Rng& rng)
      : cluster(make_full_cooperation(cells, users, 1)),
        p_max(cells, arma::fill::ones),
        sigma2(users, arma::fill::value(noise)),
        mu(users, arma::fill::ones) {
    ch = random_channels(cells, users, nr, nt, rng);
    beams = matched_filter_init(ch, cluster, p_max);
    state = make_stream_state(cluster, mu, sigma2);
    rx = mmse_receiver(ch, beams, cluster, sigma2, &state);
    for (int s = 0; s < cluster.total_streams(); ++s)
      state.epsilon(s) = compute_mse(ch, beams, rx, cluster, noise, s);
    state = update_weights(std::move(state), mu, cluster);
  }
};

}  // namespace

TEST_CASE("orthogonal pilot books: unit modulus, squared norm S, B^H B = S I") {
  Rng rng(1);
  const int S = 8, n = 5;
  const PilotBook book = make_pilot_book(S, n, true, rng);
  CHECK(book.length == S);
  CHECK(book.orthogonal);
  CHECK(arma::abs(arma::abs(book.ul) - 1.0).max() < 1e-12);
  const arma::cx_mat gram = book.ul.t() * book.ul;
  CHECK(arma::abs(gram - static_cast<double>(S) *
                             arma::eye<arma::cx_mat>(n, n)).max() < 1e-10);
  for (int s = 0; s < n; ++s)
    CHECK(std::pow(arma::norm(book.dl.col(s)), 2) == doctest::Approx(S));
}

TEST_CASE("random books are unit-modulus QPSK with squared norm S") {
  Rng rng(2);
  const PilotBook book = make_pilot_book(6, 9, false, rng);
  CHECK(!book.orthogonal);
  CHECK(arma::abs(arma::abs(book.ul) - 1.0).max() < 1e-12);
  CHECK(arma::abs(arma::abs(book.dl) - 1.0).max() < 1e-12);
  for (int s = 0; s < 9; ++s)
    CHECK(std::pow(arma::norm(book.ul.col(s)), 2) == doctest::Approx(6.0));
}

TEST_CASE("orthogonal books require length at least the stream count") {
  Rng rng(3);
  CHECK_THROWS_AS(make_pilot_book(3, 4, true, rng), std::invalid_argument);
  CHECK_THROWS_AS(make_pilot_book(0, 1, true, rng), std::invalid_argument);
  CHECK_NOTHROW(make_pilot_book(3, 4, false, rng));
}

TEST_CASE("uplink training recovery: R_b p_s / S = H_b^H u_s sqrt(w_s)") {
  Rng rng(4);
  PreparedInstance inst(2, 3, 2, 3, 0.2, rng);
  const int n = inst.cluster.total_streams();
  const PilotBook book = make_pilot_book(n, n, true, rng);
  Rng noise(9);
  const arma::field<arma::cx_mat> R = ul_training(
      inst.ch, inst.rx, inst.state, inst.cluster, book, 0.0, noise);
  for (int b = 0; b < 2; ++b) {
    REQUIRE(R(b).n_cols == static_cast<arma::uword>(n));
    for (int s = 0; s < n; ++s) {
      const arma::cx_vec expect = inst.ch.H(b, inst.cluster.user_of(s)).t() *
                                  inst.rx.u.col(s) *
                                  std::sqrt(inst.state.weight(s));
      const arma::cx_vec got = R(b) * book.ul.col(s) / double(n);
      CHECK(arma::abs(got - expect).max() < 1e-10);
    }
  }
}

TEST_CASE("downlink training recovery: T_k g_s / S = effective channel") {
  Rng rng(5);
  PreparedInstance inst(2, 3, 2, 2, 0.2, rng);
  const int n = inst.cluster.total_streams();
  const PilotBook book = make_pilot_book(n + 2, n, true, rng);  // S > n also works
  Rng noise(9);
  const arma::field<arma::cx_mat> T = dl_training(
      inst.ch, inst.beams, inst.state, inst.cluster, book, 0.0, noise);
  for (int k = 0; k < 3; ++k) {
    for (int s = 0; s < n; ++s) {
      const arma::cx_vec expect =
          effective_channel(inst.ch, inst.beams, inst.cluster, k, s);
      const arma::cx_vec got = T(k) * book.dl.col(s) / double(n + 2);
      CHECK(arma::abs(got - expect).max() < 1e-10);
    }
  }
}

TEST_CASE("training-based receivers equal noise-free MMSE filters") {
  Rng rng(6);
  // Two streams at a two-antenna user give a full-rank training Gram matrix.
  PreparedInstance inst(1, 2, 2, 2, 0.3, rng);
  const int n = inst.cluster.total_streams();
  const PilotBook book = make_pilot_book(n, n, true, rng);
  Rng noise(9);
  const arma::field<arma::cx_mat> T = dl_training(
      inst.ch, inst.beams, inst.state, inst.cluster, book, 0.0, noise);
  const ReceiverSet de = de_mmse_receiver(T, book, inst.cluster, inst.state);
  const ReceiverSet exact = mmse_receiver(inst.ch, inst.beams, inst.cluster,
                                          arma::vec(2, arma::fill::zeros));
  CHECK(arma::abs(de.u - exact.u).max() < 1e-8);
}

TEST_CASE("scalar training receiver inverts the composite channel") {
  ChannelTensor ch;
  ch.H.set_size(1, 1);
  ch.H(0, 0) = arma::cx_mat(1, 1);
  ch.H(0, 0)(0, 0) = 2.0;
  const ClusterMap cluster = make_full_cooperation(1, 1, 1);
  BeamformerSet beams;
  beams.m.set_size(1, 1, 1);
  beams.m(0, 0, 0) = 0.25;
  beams.p_max = arma::vec{1.0};
  StreamState state =
      make_stream_state(cluster, arma::vec{1.0}, arma::vec{1.0});
  Rng rng(7), noise(8);
  const PilotBook book = make_pilot_book(4, 1, true, rng);
  const arma::field<arma::cx_mat> T =
      dl_training(ch, beams, state, cluster, book, 0.0, noise);
  const ReceiverSet de = de_mmse_receiver(T, book, cluster, state);
  // u = 1/(h m) = 1/0.5.
  CHECK(de.u(0, 0).real() == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(de.u(0, 0).imag() == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("rank-deficient training Gram falls back to a counted ridge") {
  Rng rng(8);
  // One stream at a two-antenna user: T T^H has rank one.
  PreparedInstance inst(1, 1, 2, 2, 0.3, rng);
  const PilotBook book = make_pilot_book(1, 1, true, rng);
  Rng noise(9);
  const arma::field<arma::cx_mat> T = dl_training(
      inst.ch, inst.beams, inst.state, inst.cluster, book, 0.0, noise);
  Diagnostics diag;
  const ReceiverSet de =
      de_mmse_receiver(T, book, inst.cluster, inst.state, &diag);
  CHECK(diag.regularized_solves >= 1);
  CHECK(de.u.is_finite());
}

TEST_CASE("pilot-domain best response equals the explicit-signal solve") {
  Rng rng(10);
  PreparedInstance inst(2, 4, 2, 3, 0.25, rng);
  const int n = inst.cluster.total_streams();
  const PilotBook book = make_pilot_book(n, n, true, rng);
  Rng noise(9);
  const arma::field<arma::cx_mat> R = ul_training(
      inst.ch, inst.rx, inst.state, inst.cluster, book, 0.0, noise);
  const arma::cx_cube y =
      link_signals(inst.ch, inst.beams, inst.rx, inst.cluster, &inst.state);
  for (int b = 0; b < 2; ++b) {
    arma::cx_mat peers(n, n, arma::fill::zeros);
    for (int s = 0; s < n; ++s)
      for (int j : inst.cluster.serving[inst.cluster.user_of(s)])
        if (j != b) peers.col(s) += R(j).t() * inst.beams.m.slice(s).col(j);
    const BisectionResult de = de_br_solve(R(b), book, inst.state,
                                           inst.cluster, peers, b, 1.0);
    const BisectionResult sse = br_local_solve(inst.ch, inst.rx, inst.state,
                                               inst.cluster, y, b, 1.0);
    CHECK(arma::abs(de.beams - sse.beams).max() < 1e-8);
    CHECK(de.constrained == sse.constrained);
  }
}

TEST_CASE("pilot-domain consensus solve equals the explicit-signal solve") {
  Rng rng(11);
  PreparedInstance inst(2, 3, 2, 2, 0.25, rng);
  const int n = inst.cluster.total_streams();
  const PilotBook book = make_pilot_book(n, n, true, rng);
  Rng noise(9);
  const arma::field<arma::cx_mat> R = ul_training(
      inst.ch, inst.rx, inst.state, inst.cluster, book, 0.0, noise);
  // A penalty target with stream-scalar entries q(rx, s) maps into the pilot
  // basis as q_de(:, s) = sum_rx pilot_rx * q(rx, s); the sqrt-weight factor
  // is carried by the training matrix itself, not by the basis expansion.
  const arma::cx_mat q_sse = rng.cgaussian_mat(n, n);
  arma::cx_mat q_de(n, n, arma::fill::zeros);
  for (int s = 0; s < n; ++s)
    for (int rxs = 0; rxs < n; ++rxs)
      q_de.col(s) += book.ul.col(rxs) * q_sse(rxs, s);
  const double rho = 3.0;
  for (int b = 0; b < 2; ++b) {
    const BisectionResult de = de_admm_solve(R(b), book, inst.state,
                                             inst.cluster, q_de, rho, b, 1.0);
    const BisectionResult sse = admm_local_solve(
        inst.ch, inst.rx, inst.state, inst.cluster, q_sse, rho, b, 1.0);
    CHECK(arma::abs(de.beams - sse.beams).max() < 1e-8);
  }
}

TEST_CASE("pilot-domain consensus recursion, elementwise") {
  DeAdmmState state;
  state.rho = 3.0;
  state.beta_dual = 1.0 / 3.0;
  state.s_bar = arma::cx_mat(1, 1, arma::fill::zeros);
  state.lambda_bar = arma::cx_mat(1, 1, arma::fill::zeros);
  arma::cx_mat recv(1, 1);
  recv(0, 0) = 2.0;
  const double residual = de_admm_iterate(state, recv);
  CHECK(state.s_bar(0, 0).real() == doctest::Approx(1.5));
  CHECK(residual == doctest::Approx(0.5));
  CHECK(state.lambda_bar(0, 0).real() == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("pilot-domain gradient equals the stream-scalar gradient") {
  Rng rng(12);
  PreparedInstance inst(2, 3, 2, 2, 0.25, rng);
  const int n = inst.cluster.total_streams();
  const PilotBook book = make_pilot_book(n, n, true, rng);
  Rng noise(9);
  const arma::field<arma::cx_mat> R = ul_training(
      inst.ch, inst.rx, inst.state, inst.cluster, book, 0.0, noise);
  const arma::cx_cube y =
      link_signals(inst.ch, inst.beams, inst.rx, inst.cluster, &inst.state);
  arma::cx_mat coherent_sse(n, n, arma::fill::zeros);
  for (int b = 0; b < 2; ++b)
    for (int tx = 0; tx < n; ++tx)
      for (int rxs = 0; rxs < n; ++rxs)
        coherent_sse(rxs, tx) +=
            std::sqrt(inst.state.weight(rxs)) * y(rxs, tx, b);
  // The delivered pilot-domain sums are the same scalars in the pilot basis.
  arma::cx_mat coherent_de(n, n, arma::fill::zeros);
  for (int s = 0; s < n; ++s)
    for (int j : inst.cluster.serving[inst.cluster.user_of(s)])
      coherent_de.col(s) += R(j).t() * inst.beams.m.slice(s).col(j);
  for (int b = 0; b < 2; ++b) {
    for (int s = 0; s < n; ++s) {
      const arma::cx_vec g_sse = sg_gradient(inst.ch, inst.rx, inst.state,
                                             inst.cluster, coherent_sse, b, s);
      const arma::cx_vec g_de =
          de_sg_gradient(R(b), book, inst.state, coherent_de, b, s);
      CHECK(arma::abs(g_de - g_sse).max() < 1e-10);
    }
  }
}

TEST_CASE("symbol-level gradient accumulation equals the batched form") {
  Rng rng(13);
  PreparedInstance inst(2, 3, 2, 2, 0.25, rng);
  const int n = inst.cluster.total_streams();
  const PilotBook book = make_pilot_book(n + 3, n, false, rng);  // generic book
  Rng noise(14);
  const arma::field<arma::cx_mat> R = ul_training(
      inst.ch, inst.rx, inst.state, inst.cluster, book, 0.05, noise);
  const arma::cx_mat coherent = rng.cgaussian_mat(n + 3, n);
  for (int b = 0; b < 2; ++b)
    for (int s = 0; s < n; ++s) {
      const arma::cx_vec batched =
          de_sg_gradient(R(b), book, inst.state, coherent, b, s);
      const arma::cx_vec streamed =
          de_sg_gradient_symbolwise(R(b), book, inst.state, coherent, b, s);
      CHECK(arma::abs(streamed - batched).max() <=
            1e-12 * std::max(1.0, arma::abs(batched).max()));
    }
}

TEST_CASE("zero training residual has zero gradient") {
  Rng rng(15);
  PreparedInstance inst(1, 2, 2, 2, 0.25, rng);
  const int n = inst.cluster.total_streams();
  const PilotBook book = make_pilot_book(n, n, true, rng);
  Rng noise(9);
  const arma::field<arma::cx_mat> R = ul_training(
      inst.ch, inst.rx, inst.state, inst.cluster, book, 0.0, noise);
  arma::cx_mat coherent(n, n, arma::fill::zeros);
  for (int s = 0; s < n; ++s)
    coherent.col(s) = std::sqrt(inst.state.weight(s)) * book.ul.col(s);
  for (int s = 0; s < n; ++s) {
    const arma::cx_vec g =
        de_sg_gradient(R(0), book, inst.state, coherent, 0, s);
    CHECK(arma::abs(g).max() < 1e-12);
  }
}

TEST_CASE("pilot-domain least squares matches the weighted MSE objective") {
  Rng rng(16);
  PreparedInstance inst(2, 3, 2, 2, 0.3, rng);
  const int n = inst.cluster.total_streams();
  const PilotBook book = make_pilot_book(n, n, true, rng);
  Rng noise(9);
  const arma::field<arma::cx_mat> R = ul_training(
      inst.ch, inst.rx, inst.state, inst.cluster, book, 0.0, noise);
  CHECK(ls_wmmse_equivalence_check(inst.ch, inst.beams, inst.rx, inst.state,
                                   inst.cluster, R, book));
}

TEST_CASE("frozen receive side: pilot schemes walk the explicit trajectory") {
  // With noiseless data and pilots, identical initialization, and a fixed
  // receive side, every pilot-domain update must reproduce its explicit
  // counterpart step for step.
  struct Case {
    DeAlgorithm de;
    SseAlgorithm sse;
    double tol;
  };
  const Case cases[] = {
      {DeAlgorithm::best_response, SseAlgorithm::best_response, 1e-12},
      {DeAlgorithm::admm, SseAlgorithm::admm, 1e-10},
      {DeAlgorithm::stochastic_gradient, SseAlgorithm::stochastic_gradient,
       1e-5},
  };
  const int cells = 3, users = 8, nr = 2, nt = 2, iters = 25;
  for (const Case& c : cases) {
    double worst = 0.0;
    for (int seed = 1; seed <= 5; ++seed) {
      Rng rng(seed);
      ChannelTensor ch = random_channels(cells, users, nr, nt, rng);
      for (int b = 0; b < cells; ++b)
        for (int k = 0; k < users; ++k)
          ch.H(b, k) *= std::sqrt(0.1 + 0.9 * rng.uniform());
      const ClusterMap cluster = make_full_cooperation(cells, users, 1);
      const arma::vec p_max(cells, arma::fill::ones);
      const arma::vec sigma2(users, arma::fill::zeros);
      const arma::vec mu(users, arma::fill::ones);
      const BeamformerSet init = matched_filter_init(ch, cluster, p_max);
      const int n = cluster.total_streams();
      Rng book_rng = rng.derive(7);
      const PilotBook book = make_pilot_book(n, n, true, book_rng);

      BisectionSpec tight;
      tight.tolerance = 1e-12;
      tight.max_iters = 400;
      SseOptions so;
      so.algorithm = c.sse;
      so.update_receivers = false;
      so.refresh_weights = false;
      so.bisection = tight;
      DeOptions dopt;
      dopt.algorithm = c.de;
      dopt.beta_dual = 1.0;  // explicit scheme uses a unit dual step
      dopt.update_receivers = false;
      dopt.refresh_weights = false;
      dopt.bisection = tight;

      SseStepper sse(cluster, p_max, sigma2, mu, init, so);
      DeStepper de(cluster, p_max, sigma2, mu, init, book, dopt, rng.derive(9));
      for (int it = 0; it < iters; ++it) {
        sse.step(ch);
        de.step(ch);
        const double scale = arma::abs(sse.beams().m).max();
        const double diff =
            arma::abs(de.beams().m - sse.beams().m).max() / std::max(scale, 1e-30);
        worst = std::max(worst, diff);
      }
    }
    CHECK(worst < c.tol);
  }
}

TEST_CASE("longer noisy pilots close the gap to the explicit scheme") {
  const int cells = 2, users = 4, nr = 1, nt = 2, iters = 5, seeds = 20;
  const ClusterMap cluster = make_full_cooperation(cells, users, 1);
  const arma::vec p_max(cells, arma::fill::ones);
  const arma::vec sigma2(users, arma::fill::zeros);
  const arma::vec mu(users, arma::fill::ones);
  const int lengths[] = {4, 8, 16};
  double gap[3] = {0.0, 0.0, 0.0};
  for (int seed = 1; seed <= seeds; ++seed) {
    Rng rng(seed);
    const ChannelTensor ch = random_channels(cells, users, nr, nt, rng);
    const BeamformerSet init = matched_filter_init(ch, cluster, p_max);
    SseOptions so;
    so.algorithm = SseAlgorithm::best_response;
    const SseTrace reference =
        run_sse(ch, cluster, p_max, sigma2, mu, init, so, iters);
    for (int i = 0; i < 3; ++i) {
      Rng book_rng = rng.derive(7);
      const PilotBook book =
          make_pilot_book(lengths[i], cluster.total_streams(), true, book_rng);
      DeOptions dopt;
      dopt.algorithm = DeAlgorithm::best_response;
      dopt.pilot_noise_power = 0.1;
      const SseTrace trace = run_de(ch, cluster, p_max, sigma2, mu, init, book,
                                    dopt, iters, rng.derive(9));
      gap[i] += std::abs(trace.sum_rate.back() - reference.sum_rate.back());
    }
  }
  CHECK(gap[0] > gap[1]);
  CHECK(gap[1] > gap[2]);
}

TEST_CASE("pilot-scheme ledger charges one scalar per active stream per round") {
  Rng rng(17);
  PreparedInstance inst(2, 3, 2, 2, 0.2, rng);
  const int n = inst.cluster.total_streams();
  Rng book_rng(18);
  const PilotBook book = make_pilot_book(n, n, true, book_rng);
  DeOptions options;
  options.algorithm = DeAlgorithm::best_response;
  DeStepper stepper(inst.cluster, inst.p_max, inst.sigma2, inst.mu, inst.beams,
                    book, options, Rng(19));
  stepper.step(inst.ch);
  CHECK(stepper.ledger().rounds == 1);
  CHECK(stepper.ledger().scalars == n);
  stepper.step(inst.ch);
  CHECK(stepper.ledger().scalars == 2 * n);
}

TEST_CASE("pilot convergence runner yields finite, improving rates") {
  Rng rng(20);
  PreparedInstance inst(2, 3, 2, 2, 0.2, rng);
  const int n = inst.cluster.total_streams();
  Rng book_rng(21);
  const PilotBook book = make_pilot_book(n, n, true, book_rng);
  DeOptions options;
  options.algorithm = DeAlgorithm::admm;
  const SseTrace trace = run_de(inst.ch, inst.cluster, inst.p_max, inst.sigma2,
                                inst.mu, inst.beams, book, options, 20, Rng(22));
  REQUIRE(trace.sum_rate.n_elem == 20);
  CHECK(trace.sum_rate.is_finite());
  CHECK(trace.sum_rate.max() > trace.sum_rate(0));
  CHECK(trace.consensus_residual.is_finite());
}
