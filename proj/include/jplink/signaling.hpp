// SPDX-License-Identifier: Apache-2.0
/**
 * @file signaling.hpp
 * @brief Bi-directional training frame accounting, differential quantization
 *        of exchanged scalars, and backhaul-load bookkeeping.
 *
 * A TDD frame spends a fraction gamma of its symbols on beamformer training
 * (bit bi-directional iterations, each needing an uplink and a downlink pilot
 * phase), leaving (1 - gamma) for data.  Iterative schemes exchange complex
 * scalars each iteration; links can pass them through a differential mid-rise
 * quantizer with receiver-side smoothing and an adaptive range.
 */
#pragma once

#include <armadillo>
#include <complex>
#include <cstdint>
#include <vector>

#include "jplink/system_model.hpp"

namespace jplink {

struct FrameSchedule {
  double gamma = 0.0;       ///< training overhead fraction; 0 = not modeled
  int bit = 0;              ///< bi-directional training iterations per frame
  long frame_symbols = 0;   ///< 2 * bit / gamma (0 when gamma = 0)

  double data_fraction() const { return 1.0 - gamma; }
};

/// Build a schedule; gamma must lie in [0, 1) and bit >= 1.
FrameSchedule build_schedule(double gamma, int bit);

/// Rate after training overhead: (1 - gamma) * rate.
double effective_rate(const FrameSchedule& schedule, double rate);

/// Differential scalar quantizer with q bits per I/Q branch (q = 0 encodes an
/// unquantized pass-through link).  The transmitted symbol is the mid-rise
/// quantization of the difference to the last reconstruction; the receiver
/// adds it back and applies exponential smoothing with smoothing_beta.
struct QuantizerState {
  int q_bits = 0;
  std::complex<double> last{0.0, 0.0};  ///< last smoothed reconstruction
  double smoothing_beta = 1.0;
  double range = 0.0;                   ///< symmetric per-branch range
  bool primed = false;                  ///< range initialized from data
  long long saturations = 0;            ///< clipped branch count
};

/// Quantize one value through the link; updates the state and returns the
/// reconstruction the receiver observes.
std::complex<double> quantize_differential(QuantizerState& state,
                                           std::complex<double> value);

/// Frame-boundary decay of the adaptive range (running-max tracking).
void decay_range(QuantizerState& state, double factor = 0.99);

enum class ExchangeScheme { backhaul_offload, feedback_channel, global_csi };

/// Complex scalars a scheme must move per active stream and iteration:
/// stream-signal schemes need one scalar per receiving stream, full channel
/// sharing needs the users * nr * nt channel entries.
long long account_exchange(ExchangeScheme scheme, const ClusterMap& cluster,
                           int nt, int nr);

/// Cumulative exchange bookkeeping.
struct BackhaulLedger {
  ExchangeScheme scheme = ExchangeScheme::backhaul_offload;
  long long rounds = 0;
  long long scalars = 0;

  void add_round(long long scalar_count) {
    ++rounds;
    scalars += scalar_count;
  }
};

/// Deliver one synchronized round of messages through per-link quantizers.
/// links.size() must equal messages.size(); every receiver observes the
/// reconstruction, and the ledger is charged with @p scalar_count (typically
/// account_exchange(...) * active streams).
std::vector<std::complex<double>> exchange_round(
    const std::vector<std::complex<double>>& messages,
    std::vector<QuantizerState>& links, BackhaulLedger& ledger,
    long long scalar_count);

}  // namespace jplink
