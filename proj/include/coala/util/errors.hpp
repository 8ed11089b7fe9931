#ifndef COALA_UTIL_ERRORS_HPP_
#define COALA_UTIL_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace coala {

// Numeric failure (non-finite value, singular matrix, NaN watchdog).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Bad configuration or invalid argument combination.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Misuse of an API contract (tape reuse, shape mismatch).
class UsageError : public std::logic_error {
 public:
  explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace coala

#endif  // COALA_UTIL_ERRORS_HPP_
