// SPDX-License-Identifier: Apache-2.0
#include "jplink/admission.hpp"

#include <algorithm>
#include <stdexcept>

namespace jplink {

std::vector<char> detect_dropped(const BeamformerSet& beams,
                                 const ClusterMap& cluster,
                                 const std::vector<char>& active,
                                 double threshold) {
  if (active.size() != static_cast<size_t>(cluster.total_streams()))
    throw std::invalid_argument("active flags do not match stream count");
  int max_streams = 1;
  for (int l : cluster.streams) max_streams = std::max(max_streams, l);

  std::vector<char> updated = active;
  for (int s = 0; s < cluster.total_streams(); ++s) {
    if (!updated[s]) continue;
    const int k = cluster.user_of(s);
    double power = 0.0;
    double fair_share = 0.0;
    for (int b : cluster.serving[k]) {
      power += std::real(
          arma::cdot(beams.m.slice(s).col(b), beams.m.slice(s).col(b)));
      fair_share += beams.p_max(b) /
                    (static_cast<double>(cluster.served[b].size()) * max_streams);
    }
    fair_share /= static_cast<double>(cluster.serving[k].size());
    if (power < threshold * fair_share) updated[s] = 0;
  }
  return updated;
}

bool is_reset_frame(long frame, const AdmissionPolicy& policy) {
  if (frame == 0) return true;  // initialization counts as a reset
  return policy.reset_interval > 0 && frame % policy.reset_interval == 0;
}

int bit_for_frame(long frame, const AdmissionPolicy& policy) {
  return is_reset_frame(frame, policy) ? policy.bit_after_reset
                                       : policy.bit_normal;
}

const BeamformerSet& select_active(const BeamformerPair& pair, long frame,
                                   const AdmissionPolicy& policy) {
  if (policy.delayed_indexing && pair.has_stored_active &&
      is_reset_frame(frame, policy))
    return pair.active;
  return pair.training;
}

}  // namespace jplink
