#pragma once

#include <stdexcept>
#include <string>

namespace cgc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape mismatch between operands (or an operand that must not be empty).
struct DimensionError : Error {
  using Error::Error;
};

// NaN/Inf escaped from a numeric op, or an optimizer state went bad.
struct NumericError : Error {
  using Error::Error;
};

// Malformed or unreadable file.
struct IoError : Error {
  using Error::Error;
};

// Unknown key, unparsable value, or out-of-range setting in a config.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace cgc
