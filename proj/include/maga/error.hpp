#pragma once

#include <stdexcept>
#include <string>

namespace maga {

/// Input rejected by a contract check (bad field, bad config, orphan title).
/// The CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Failure while computing (non-finite gradient, I/O). CLI exit code 2.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace maga
