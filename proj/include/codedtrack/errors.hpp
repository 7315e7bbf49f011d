#pragma once

#include <stdexcept>
#include <string>

namespace codedtrack {

/// Inconsistent dimensions, invalid parameters, malformed config input.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure inside a filter update (e.g. singular innovation covariance).
class FilterError : public std::runtime_error {
 public:
  explicit FilterError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace codedtrack
