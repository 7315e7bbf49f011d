#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace codedtrack {

/// SplitMix64 finalizer. Used to derive per-simulation and per-component
/// seeds: mix_seed(seed, salt) = splitmix64(seed + salt).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

/// Named child streams. Each simulation component draws from its own stream
/// so that, e.g., changing the code design never perturbs the trajectory.
enum class Stream : std::uint64_t {
  kTrajectory = 0x7472616a,
  kInitialState = 0x696e6974,
  kMonitorInit = 0x6d6f6e69,
  kCode = 0x636f6465,
  kStraggler = 0x73747261,
  kWorker = 0x776f726b,
  kWarmup = 0x7761726d,
};

/// Seeded, splittable source of randomness. Copying a stream copies its state.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  /// Independent child stream keyed by `tag`. Does not advance this stream.
  RandomStream split(std::uint64_t tag) const;
  RandomStream split(Stream tag) const { return split(static_cast<std::uint64_t>(tag)); }

  double normal();
  double uniform(double lo, double hi);
  /// Exponential draw with the given rate (mean 1/rate).
  double exponential(double rate);
  Eigen::VectorXd standard_normal(Eigen::Index n);

  std::uint64_t seed() const { return seed_; }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace codedtrack
