#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cocycle_forge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (out-of-range lambda, empty schedule, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InvalidInput {
 public:
  DimensionMismatch(const std::string& what, int expected, int actual)
      : InvalidInput(what + ": expected dimension " + std::to_string(expected) + ", got " +
                     std::to_string(actual)) {}
};

/// Raised when an exact Fourier solution is requested but some harmonics were rejected
/// because their denominators fell below the configured threshold.
class SmallDenominator : public Error {
 public:
  explicit SmallDenominator(std::vector<std::int64_t> harmonics)
      : Error(describe(harmonics)), harmonics_(std::move(harmonics)) {}

  const std::vector<std::int64_t>& harmonics() const noexcept { return harmonics_; }

 private:
  static std::string describe(const std::vector<std::int64_t>& ks) {
    std::string out = "small denominator at harmonic(s):";
    for (auto k : ks) out += " " + std::to_string(k);
    return out;
  }

  std::vector<std::int64_t> harmonics_;
};

}  // namespace cocycle_forge
