// SPDX-License-Identifier: Apache-2.0
#include "jplink/fading.hpp"

#include <cmath>
#include <stdexcept>

namespace jplink {

FadingProcess::FadingProcess(int cells, int users, int nr, int nt,
                             double normalized_doppler, const arma::mat& gain,
                             Rng rng)
    : cells_(cells),
      users_(users),
      nr_(nr),
      nt_(nt),
      normalized_doppler_(normalized_doppler),
      gain_(gain) {
  if (gain.n_rows != static_cast<arma::uword>(cells) ||
      gain.n_cols != static_cast<arma::uword>(users))
    throw std::invalid_argument("gain matrix must be cells x users");
  const arma::uword entries =
      static_cast<arma::uword>(cells) * users * nr * nt;
  cos_angles_.set_size(entries, kOscillators);
  phases_.set_size(entries, kOscillators);
  for (arma::uword e = 0; e < entries; ++e) {
    for (int o = 0; o < kOscillators; ++o) {
      cos_angles_(e, o) = std::cos(2.0 * M_PI * rng.uniform());
      phases_(e, o) = 2.0 * M_PI * rng.uniform();
    }
  }
}

ChannelTensor FadingProcess::at(long frame) const {
  ChannelTensor ch;
  ch.H.set_size(cells_, users_);
  const double scale0 = 1.0 / std::sqrt(static_cast<double>(kOscillators));
  arma::uword e = 0;
  for (int b = 0; b < cells_; ++b) {
    for (int k = 0; k < users_; ++k) {
      arma::cx_mat h(nr_, nt_);
      const double amp = scale0 * std::sqrt(gain_(b, k));
      for (int r = 0; r < nr_; ++r) {
        for (int t = 0; t < nt_; ++t) {
          std::complex<double> sum(0.0, 0.0);
          for (int o = 0; o < kOscillators; ++o) {
            const double arg = 2.0 * M_PI * normalized_doppler_ * frame *
                                   cos_angles_(e, o) +
                               phases_(e, o);
            sum += std::complex<double>(std::cos(arg), std::sin(arg));
          }
          h(r, t) = amp * sum;
          ++e;
        }
      }
      ch.H(b, k) = std::move(h);
    }
  }
  return ch;
}

std::vector<ChannelTensor> FadingProcess::evolve(long frames) {
  if (frames < 0) throw std::invalid_argument("frames must be >= 0");
  std::vector<ChannelTensor> out;
  out.reserve(frames);
  for (long f = 0; f < frames; ++f) out.push_back(at(time_index_ + f));
  time_index_ += frames;
  return out;
}

}  // namespace jplink
