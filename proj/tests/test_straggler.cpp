#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "codedtrack/straggler.hpp"

using namespace codedtrack;

namespace {

double mean_unavailability(double beta, int draws, std::uint64_t seed) {
  RandomStream rng(seed);
  double sum = 0.0;
  for (int k = 0; k < draws; ++k) sum += sample_unavailability(beta, rng);
  return sum / draws;
}

double availability_fraction(std::size_t n_workers, double beta, double dt, long steps,
                             std::uint64_t seed) {
  auto as = make_availability(n_workers, beta, dt);
  RandomStream rng(seed);
  double avail = 0.0;
  for (long t = 0; t < steps; ++t) avail += static_cast<double>(step_available(as, t, rng).size());
  return avail / (static_cast<double>(steps) * static_cast<double>(n_workers));
}

// Event-driven renewal simulation in continuous time: a worker that finishes a
// task at a step boundary is free again after an exponential delay and picks up
// the next task at the first boundary at or after that moment.
double renewal_oracle(double beta, double dt, double horizon, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::exponential_distribution<double> delay(beta);
  double now = 0.0;
  long tasks = 0;
  while (now < horizon) {
    ++tasks;
    const double free_at = now + delay(eng);
    now = std::max(now + dt, std::ceil(free_at / dt) * dt);
  }
  return static_cast<double>(tasks) / (horizon / dt);
}

}  // namespace

TEST(SampleUnavailability, MeanIsInverseRate) {
  EXPECT_NEAR(mean_unavailability(10.0, 1000000, 1), 0.1, 0.1 * 0.02);
  EXPECT_NEAR(mean_unavailability(1.0, 1000000, 2), 1.0, 1.0 * 0.02);
}

TEST(SampleUnavailability, ReproducibleForSeed) {
  RandomStream a(3);
  RandomStream b(3);
  for (int k = 0; k < 10; ++k) EXPECT_EQ(sample_unavailability(10.0, a), sample_unavailability(10.0, b));
}

TEST(StepAvailable, ForcedAvailabilityKeepsEveryone) {
  auto as = make_availability(4, 10.0, 0.1, true);
  RandomStream rng(4);
  for (long t = 0; t < 100; ++t) {
    EXPECT_EQ(step_available(as, t, rng), (std::vector<std::size_t>{0, 1, 2, 3}));
  }
}

TEST(StepAvailable, FirstCallAvailable) {
  auto as = make_availability(1, 10.0, 0.1);
  RandomStream rng(5);
  EXPECT_EQ(step_available(as, 0, rng), std::vector<std::size_t>{0});
  EXPECT_GT(as.busy_until[0], 0.0);
}

TEST(StepAvailable, BusyUntilRule) {
  auto as = make_availability(2, 10.0, 0.1);
  RandomStream rng(6);
  as.busy_until = {0.25, 0.2};
  // t = 2: 0.2 <= 0.2 but 0.25 > 0.2.
  const auto avail = step_available(as, 2, rng);
  EXPECT_EQ(avail, std::vector<std::size_t>{1});
  EXPECT_EQ(as.busy_until[0], 0.25);
  EXPECT_GE(as.busy_until[1], 0.2);
}

TEST(StepAvailable, DutyCycleMatchesRenewalOracle) {
  const double sim = availability_fraction(8, 10.0, 0.1, 100000, 7);
  const double oracle = renewal_oracle(10.0, 0.1, 0.1 * 400000, 7);
  EXPECT_NEAR(sim, oracle, 0.03 * oracle);
  // Closed form of the same renewal process: each task occupies ceil(V / dt)
  // steps, so the duty cycle is 1 - exp(-beta dt). Not dt / (dt + 1/beta) = 0.5.
  EXPECT_NEAR(sim, 1.0 - std::exp(-1.0), 0.03 * (1.0 - std::exp(-1.0)));
}

// ---------------------------------------------------------------------------

TEST(StragglerProperty, AvailabilityNondecreasingInDt) {
  double prev = 0.0;
  for (const double dt : {0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0}) {
    const double a = availability_fraction(1, 10.0, dt, 100000, 8);
    EXPECT_GE(a, prev - 0.01) << "dt=" << dt;
    prev = a;
  }
}

TEST(StragglerProperty, ForcedAvailabilityDrawsNothing) {
  auto as = make_availability(3, 10.0, 0.1, true);
  RandomStream rng(9);
  RandomStream untouched(9);
  for (long t = 0; t < 10; ++t) EXPECT_EQ(step_available(as, t, rng).size(), 3u);
  EXPECT_EQ(rng.normal(), untouched.normal());
}

TEST(StragglerProperty, BusyUntilNondecreasing) {
  auto as = make_availability(5, 3.0, 0.05);
  RandomStream rng(10);
  std::vector<double> last(5, 0.0);
  for (long t = 0; t < 10000; ++t) {
    step_available(as, t, rng);
    for (std::size_t w = 0; w < 5; ++w) {
      EXPECT_GE(as.busy_until[w], last[w]);
      last[w] = as.busy_until[w];
    }
  }
}
