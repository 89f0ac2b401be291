// SPDX-License-Identifier: Apache-2.0
// Sum-of-sinusoids Rayleigh fading: normalization, determinism, correlation.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <stdexcept>

#include "jplink/fading.hpp"

using namespace jplink;

TEST_CASE("zero Doppler freezes the channel") {
  const arma::mat gain(2, 3, arma::fill::ones);
  const FadingProcess fading(2, 3, 2, 2, 0.0, gain, Rng(7));
  const ChannelTensor a = fading.at(0);
  const ChannelTensor b = fading.at(123);
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < 3; ++k)
      CHECK(arma::abs(a.H(c, k) - b.H(c, k)).max() == 0.0);
}

TEST_CASE("same seed reproduces the same realization") {
  const arma::mat gain(1, 2, arma::fill::ones);
  const FadingProcess f1(1, 2, 2, 4, 0.02, gain, Rng(42));
  const FadingProcess f2(1, 2, 2, 4, 0.02, gain, Rng(42));
  const ChannelTensor a = f1.at(17);
  const ChannelTensor b = f2.at(17);
  for (int k = 0; k < 2; ++k)
    CHECK(arma::abs(a.H(0, k) - b.H(0, k)).max() == 0.0);
}

TEST_CASE("gain scales amplitudes as its square root, exactly") {
  const arma::mat gain(1, 1, arma::fill::ones);
  const arma::mat gain4 = 4.0 * gain;
  const FadingProcess f1(1, 1, 2, 2, 0.01, gain, Rng(5));
  const FadingProcess f2(1, 1, 2, 2, 0.01, gain4, Rng(5));
  const ChannelTensor a = f1.at(3);
  const ChannelTensor b = f2.at(3);
  CHECK(arma::abs(b.H(0, 0) - 2.0 * a.H(0, 0)).max() < 1e-14);
}

TEST_CASE("mean channel power approaches the distance-law gain") {
  // 1000 i.i.d. entries at one frame; relative deviation ~ 1/sqrt(1000).
  const double g = 0.25;
  const arma::mat gain(1, 125, arma::fill::value(g));
  const FadingProcess fading(1, 125, 2, 4, 0.01, gain, Rng(11));
  const ChannelTensor ch = fading.at(0);
  double power = 0.0;
  int entries = 0;
  for (int k = 0; k < 125; ++k) {
    power += arma::accu(arma::square(arma::abs(ch.H(0, k))));
    entries += static_cast<int>(ch.H(0, k).n_elem);
  }
  CHECK(power / entries == doctest::Approx(g).epsilon(0.15));
}

TEST_CASE("evolve walks the same trajectory as stateless evaluation") {
  const arma::mat gain(1, 2, arma::fill::ones);
  FadingProcess fading(1, 2, 1, 2, 0.03, gain, Rng(9));
  const FadingProcess reference(1, 2, 1, 2, 0.03, gain, Rng(9));
  CHECK(fading.time_index() == 0);
  const std::vector<ChannelTensor> first = fading.evolve(3);
  REQUIRE(first.size() == 3);
  CHECK(fading.time_index() == 3);
  const std::vector<ChannelTensor> second = fading.evolve(2);
  CHECK(fading.time_index() == 5);
  for (long f = 0; f < 3; ++f) {
    const ChannelTensor expect = reference.at(f);
    for (int k = 0; k < 2; ++k)
      CHECK(arma::abs(first[f].H(0, k) - expect.H(0, k)).max() == 0.0);
  }
  for (long f = 0; f < 2; ++f) {
    const ChannelTensor expect = reference.at(3 + f);
    for (int k = 0; k < 2; ++k)
      CHECK(arma::abs(second[f].H(0, k) - expect.H(0, k)).max() == 0.0);
  }
  CHECK_THROWS_AS(fading.evolve(-1), std::invalid_argument);
}

TEST_CASE("temporal autocorrelation follows the zeroth-order Bessel curve") {
  // 256 independent entries over 400 frames; compare the empirical normalized
  // autocorrelation at small lags against J0(2*pi*fd*lag).
  const double fd = 0.025;
  const int users = 64, frames = 400;
  const arma::mat gain(1, users, arma::fill::ones);
  const FadingProcess fading(1, users, 2, 2, fd, gain, Rng(123));
  arma::cx_mat samples(users * 4, frames);
  for (int f = 0; f < frames; ++f) {
    const ChannelTensor ch = fading.at(f);
    for (int k = 0; k < users; ++k) {
      const arma::cx_mat& h = ch.H(0, k);
      for (int e = 0; e < 4; ++e)
        samples(k * 4 + e, f) = h(e % 2, e / 2);
    }
  }
  const double denom = arma::accu(arma::square(arma::abs(samples)));
  for (int lag = 1; lag <= 3; ++lag) {
    std::complex<double> acc(0.0, 0.0);
    for (int f = 0; f + lag < frames; ++f)
      acc += arma::cdot(samples.col(f + lag), samples.col(f));
    const double expected = std::cyl_bessel_j(0, 2.0 * M_PI * fd * lag);
    const double measured =
        acc.real() / (denom * (frames - lag) / static_cast<double>(frames));
    CHECK(std::abs(measured - expected) < 0.05);
  }
}

TEST_CASE("gain matrix shape is validated") {
  const arma::mat bad(2, 2, arma::fill::ones);
  CHECK_THROWS_AS(FadingProcess(2, 3, 1, 1, 0.01, bad, Rng(1)),
                  std::invalid_argument);
}
