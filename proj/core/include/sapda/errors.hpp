#pragma once

#include <stdexcept>
#include <string>

namespace sapda {

/// Malformed configuration: bad dimensions, unknown keys, out-of-range values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an API precondition that cannot be expressed in the types
/// (stale activation tape, degenerate weight vector).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Training produced a non-finite loss or gradient.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sapda
