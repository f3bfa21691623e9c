#pragma once

#include <stdexcept>
#include <string>

namespace optodtc {

/// Rejected input: a precondition or a physical constraint does not hold.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not deliver its contract (integrator blow-up,
/// missing root, undefined fit).
class NumericalFailure : public std::runtime_error {
 public:
  explicit NumericalFailure(const std::string& what, double last_good_time = 0.0)
      : std::runtime_error(what), last_good_time_(last_good_time) {}

  double last_good_time() const noexcept { return last_good_time_; }

 private:
  double last_good_time_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace optodtc
