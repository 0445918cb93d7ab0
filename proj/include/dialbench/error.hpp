#pragma once

#include <stdexcept>
#include <string>

namespace dialbench {

// Bad user input: malformed files, schema violations, invalid parameters.
// The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A computation precondition that the caller failed to meet (too few
// sessions, a session too short for a metric, ...).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Internal consistency check failed. The CLI maps this to exit code 3.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace dialbench
