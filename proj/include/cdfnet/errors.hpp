#pragma once

#include <stdexcept>
#include <string>

namespace cdfnet {

/// Contract violations: bad shapes, invalid configuration, malformed files.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Numeric failures: NaN/Inf encountered where finite values are required.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace cdfnet
