// SPDX-License-Identifier: Apache-2.0
/**
 * @file common.hpp
 * @brief Shared error types and diagnostic counters.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace jplink {

/// Thrown when an iterative routine exhausts its iteration budget before
/// reaching its tolerance.  Carries the best iterate found so far so callers
/// can inspect or resume.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double best_dual, double achieved,
                   int iterations)
      : std::runtime_error(what),
        best_dual(best_dual),
        achieved(achieved),
        iterations(iterations) {}

  double best_dual;   ///< best dual value reached
  double achieved;    ///< metric value (e.g. transmit power) at the best dual
  int iterations;     ///< iterations spent
};

/// Counters for numerically notable events.  Routines that silently fall back
/// to a regularized solve record it here so tests and callers can observe it.
struct Diagnostics {
  long long regularized_solves = 0;
};

}  // namespace jplink
