#pragma once

#include <stdexcept>
#include <string>

namespace fermikac {

/// Inconsistent or out-of-range configuration. Maps to CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A velocity configuration puts two particles in one cell.
struct AdmissibilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An initial-data sampler cannot fit the requested particles under exclusion.
struct SaturationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite values, failed bracketing, and similar numerical breakdowns.
/// Maps to CLI exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fermikac
