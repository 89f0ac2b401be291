// SPDX-License-Identifier: Apache-2.0
/**
 * @file admission.hpp
 * @brief Stream admission control for overloaded networks.
 *
 * The scheduler starts every user with its full stream allocation, lets the
 * solver starve streams it cannot support, and drops streams whose transmit
 * power falls below a small fraction of the fair per-stream budget.  Periodic
 * resets re-admit all streams; the frame right after a reset trains longer.
 * With delayed indexing, data transmission keeps using the last converged
 * beamformers for exactly one frame while the reset training catches up.
 */
#pragma once

#include <vector>

#include "jplink/system_model.hpp"

namespace jplink {

struct AdmissionPolicy {
  long reset_interval = 0;      ///< reset every this many frames; 0 = never
  double drop_threshold = 1e-3; ///< fraction of the fair per-stream budget
  int bit_after_reset = 10;     ///< training iterations on a reset frame
  int bit_normal = 3;           ///< training iterations otherwise
  bool delayed_indexing = false;
};

/// Training beams (being iterated) and the active beams used for data.
struct BeamformerPair {
  BeamformerSet training;
  BeamformerSet active;
  bool has_stored_active = false;  ///< pre-reset beams are available
};

/// Flag streams whose total transmit power across serving stations fell below
/// threshold * (fair per-stream share of the serving budget).  Returns the
/// updated flags; already-inactive streams stay inactive.
std::vector<char> detect_dropped(const BeamformerSet& beams,
                                 const ClusterMap& cluster,
                                 const std::vector<char>& active,
                                 double threshold);

/// True when @p frame is a reset point: the first frame, or a multiple of the
/// reset interval when periodic resets are enabled.
bool is_reset_frame(long frame, const AdmissionPolicy& policy);

/// Training iterations to run in @p frame (longer right after a reset).
int bit_for_frame(long frame, const AdmissionPolicy& policy);

/// Beamformers to use for data in @p frame.  With delayed indexing the stored
/// pre-reset beams serve for exactly the reset frame itself; otherwise (and
/// whenever nothing is stored) the current training beams are active.
const BeamformerSet& select_active(const BeamformerPair& pair, long frame,
                                   const AdmissionPolicy& policy);

}  // namespace jplink
