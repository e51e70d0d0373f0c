#pragma once

#include <stdexcept>
#include <string>

namespace qdx {

// Invalid arguments are reported with std::invalid_argument. The types below
// carry the failure classes the CLI maps onto distinct exit codes.

/// A state object violated its physical invariants (trace, positivity, ...).
class InvalidState : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A process matrix is not completely positive and trace preserving.
class InvalidChannel : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A configuration file or option could not be parsed or validated.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A fit or reconstruction did not converge or was ill-posed.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A calibration step could not locate the feature it scans for.
class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal invariant was breached (numerical blow-up, impossible lookup).
class InvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qdx
