#include "codedtrack/random.hpp"

namespace codedtrack {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + salt + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RandomStream::RandomStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

RandomStream RandomStream::split(std::uint64_t tag) const {
  return RandomStream(mix_seed(seed_, mix_seed(tag, 0)));
}

double RandomStream::normal() { return normal_(engine_); }

double RandomStream::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

double RandomStream::exponential(double rate) {
  return std::exponential_distribution<double>(rate)(engine_);
}

Eigen::VectorXd RandomStream::standard_normal(Eigen::Index n) {
  Eigen::VectorXd g(n);
  for (Eigen::Index k = 0; k < n; ++k) g(k) = normal_(engine_);
  return g;
}

}  // namespace codedtrack
