// SPDX-License-Identifier: Apache-2.0
#include "jplink/rng.hpp"

#include <cmath>

namespace jplink {
namespace {

// splitmix64 step; used to spread substream ids into well-separated seeds.
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Rng Rng::derive(std::uint64_t stream) const {
  std::mt19937_64 probe = gen_;  // state copy; derivation does not advance *this
  const std::uint64_t base = probe();
  return Rng(splitmix64(base ^ splitmix64(stream)));
}

double Rng::uniform() {
  // 53-bit mantissa fill, uniform in [0, 1).
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

std::complex<double> Rng::cgaussian() {
  const double scale = M_SQRT1_2;
  const double re = gaussian();
  const double im = gaussian();
  return {scale * re, scale * im};
}

arma::cx_mat Rng::cgaussian_mat(arma::uword n_rows, arma::uword n_cols) {
  arma::cx_mat out(n_rows, n_cols);
  for (arma::uword c = 0; c < n_cols; ++c)
    for (arma::uword r = 0; r < n_rows; ++r) out(r, c) = cgaussian();
  return out;
}

}  // namespace jplink
