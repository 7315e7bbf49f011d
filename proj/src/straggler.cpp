#include "codedtrack/straggler.hpp"

#include "codedtrack/errors.hpp"

namespace codedtrack {

AvailabilityState make_availability(std::size_t n_workers, double beta, double dt,
                                    bool force_available) {
  if (!(beta > 0.0)) throw ConfigError("straggling parameter beta must be positive");
  if (!(dt > 0.0)) throw ConfigError("update interval dt must be positive");
  return AvailabilityState{std::vector<double>(n_workers, 0.0), beta, dt, force_available};
}

double sample_unavailability(double beta, RandomStream& rng) {
  if (!(beta > 0.0)) throw ConfigError("straggling parameter beta must be positive");
  return rng.exponential(beta);
}

std::vector<std::size_t> step_available(AvailabilityState& as, long t_index, RandomStream& rng) {
  std::vector<std::size_t> available;
  const double now = static_cast<double>(t_index) * as.dt;
  for (std::size_t w = 0; w < as.busy_until.size(); ++w) {
    if (as.force_available) {
      available.push_back(w);
      continue;
    }
    if (as.busy_until[w] <= now) {
      available.push_back(w);
      as.busy_until[w] = now + sample_unavailability(as.beta, rng);
    }
  }
  return available;
}

}  // namespace codedtrack
