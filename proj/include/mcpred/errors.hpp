#pragma once

#include <stdexcept>
#include <string>

namespace mcpred {

// Malformed input files, schema violations, unresolved references.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values, failed gradient checks, divergence.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration keys or values, unknown sweep axes.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mcpred
