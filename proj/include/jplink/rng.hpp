// SPDX-License-Identifier: Apache-2.0
/**
 * @file rng.hpp
 * @brief Deterministic random number generation.
 *
 * All stochastic components draw from this wrapper instead of using
 * distribution classes whose output is implementation defined.  Gaussian
 * variates use an explicit Box-Muller transform so identical seeds reproduce
 * identical sequences on every platform and library version.
 */
#pragma once

#include <armadillo>
#include <complex>
#include <cstdint>
#include <random>

namespace jplink {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Derive an independently seeded generator for a named substream.  Used to
  /// decouple e.g. channel fading from pilot noise so that toggling one does
  /// not perturb the other.
  Rng derive(std::uint64_t stream) const;

  /// Uniform double in [0, 1).
  double uniform();

  /// Standard normal via Box-Muller.
  double gaussian();

  /// Circularly symmetric complex normal with unit variance,
  /// i.e. real and imaginary parts are N(0, 1/2).
  std::complex<double> cgaussian();

  /// Matrix of i.i.d. unit-variance circularly symmetric complex normals.
  arma::cx_mat cgaussian_mat(arma::uword n_rows, arma::uword n_cols);

  std::uint64_t next_u64() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace jplink
