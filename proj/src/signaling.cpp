// SPDX-License-Identifier: Apache-2.0
#include "jplink/signaling.hpp"

#include <cmath>
#include <stdexcept>

namespace jplink {

FrameSchedule build_schedule(double gamma, int bit) {
  if (gamma < 0.0 || gamma >= 1.0)
    throw std::invalid_argument("training overhead gamma must be in [0, 1)");
  if (bit < 1) throw std::invalid_argument("bit must be >= 1");
  FrameSchedule schedule;
  schedule.gamma = gamma;
  schedule.bit = bit;
  schedule.frame_symbols =
      gamma > 0.0 ? std::lround(2.0 * bit / gamma) : 0;
  return schedule;
}

double effective_rate(const FrameSchedule& schedule, double rate) {
  return schedule.data_fraction() * rate;
}

namespace {

// Mid-rise uniform quantization of one branch onto 2^bits levels covering
// [-range, range]; out-of-range inputs clip to the outermost level.
double quantize_branch(double value, double range, int bits, long long* sat) {
  const double step = 2.0 * range / std::ldexp(1.0, bits);
  if (step <= 0.0) return 0.0;
  double level = std::floor(value / step);
  const double max_level = std::ldexp(1.0, bits - 1) - 1.0;
  if (level > max_level) {
    level = max_level;
    ++*sat;
  } else if (level < -max_level - 1.0) {
    level = -max_level - 1.0;
    ++*sat;
  }
  return (level + 0.5) * step;
}

}  // namespace

std::complex<double> quantize_differential(QuantizerState& state,
                                           std::complex<double> value) {
  if (state.q_bits == 0) {  // transparent link
    state.last = value;
    return value;
  }
  const std::complex<double> diff = value - state.last;
  const double ai = std::abs(diff.real());
  const double aq = std::abs(diff.imag());
  if (!state.primed) {
    state.range = std::max({ai, aq, 1e-12});
    state.primed = true;
  }
  const std::complex<double> q(
      quantize_branch(diff.real(), state.range, state.q_bits, &state.saturations),
      quantize_branch(diff.imag(), state.range, state.q_bits, &state.saturations));
  const std::complex<double> raw = state.last + q;
  const std::complex<double> smoothed =
      state.last + state.smoothing_beta * (raw - state.last);
  state.last = smoothed;
  state.range = std::max({state.range, ai, aq});
  return smoothed;
}

void decay_range(QuantizerState& state, double factor) {
  state.range *= factor;
}

long long account_exchange(ExchangeScheme scheme, const ClusterMap& cluster,
                           int nt, int nr) {
  long long total_streams = 0;
  for (int l : cluster.streams) total_streams += l;
  switch (scheme) {
    case ExchangeScheme::backhaul_offload:
    case ExchangeScheme::feedback_channel:
      return total_streams;
    case ExchangeScheme::global_csi:
      return static_cast<long long>(cluster.users()) * nr * nt;
  }
  return 0;
}

std::vector<std::complex<double>> exchange_round(
    const std::vector<std::complex<double>>& messages,
    std::vector<QuantizerState>& links, BackhaulLedger& ledger,
    long long scalar_count) {
  if (messages.size() != links.size())
    throw std::invalid_argument("one quantizer link per message required");
  std::vector<std::complex<double>> delivered(messages.size());
  for (size_t i = 0; i < messages.size(); ++i)
    delivered[i] = quantize_differential(links[i], messages[i]);
  ledger.add_round(scalar_count);
  return delivered;
}

}  // namespace jplink
