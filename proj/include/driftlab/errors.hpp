#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace driftlab {

/// A replicate whose cylindrical radius is zero, so D log F is undefined.
/// Probability zero under the model, reported rather than clamped.
class DegenerateSampleError : public std::runtime_error {
 public:
  explicit DegenerateSampleError(const std::string& what, std::uint64_t replicate = 0)
      : std::runtime_error(what), replicate_(replicate) {}

  std::uint64_t replicate() const noexcept { return replicate_; }

  DegenerateSampleError at_replicate(std::uint64_t replicate) const {
    return DegenerateSampleError(std::string(what()) + " (replicate " +
                                     std::to_string(replicate) + ")",
                                 replicate);
  }

 private:
  std::uint64_t replicate_;
};

/// Covariance input that is not symmetric positive definite or is too badly
/// conditioned to solve against.
class CovarianceError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void require(bool condition, const char* message) {
  if (!condition) throw std::invalid_argument(message);
}

}  // namespace detail
}  // namespace driftlab
