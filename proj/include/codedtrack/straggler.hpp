#pragma once

#include <cstddef>
#include <vector>

#include "codedtrack/random.hpp"

namespace codedtrack {

/// Per-worker availability. A worker that completes a task at time t dt is
/// unavailable until t dt + V with V exponential of rate beta (mean 1/beta).
struct AvailabilityState {
  std::vector<double> busy_until;
  double beta = 10.0;
  double dt = 0.1;
  /// Test hook: every worker is available every step and no draws are made.
  bool force_available = false;
};

AvailabilityState make_availability(std::size_t n_workers, double beta, double dt,
                                    bool force_available = false);

/// One unavailability period, mean 1/beta.
double sample_unavailability(double beta, RandomStream& rng);

/// Workers with busy_until <= t_index * dt, ascending. Each of them draws its
/// next unavailability period, starting at t_index * dt.
std::vector<std::size_t> step_available(AvailabilityState& as, long t_index, RandomStream& rng);

}  // namespace codedtrack
