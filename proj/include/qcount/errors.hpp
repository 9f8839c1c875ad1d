#pragma once

#include <stdexcept>
#include <string>

namespace qcount {

/// Raised when a requested construction would exceed configured resource
/// ceilings (grid length, schedule entry count). Carries the offending size
/// in the message.
class ResourceLimitError : public std::runtime_error {
 public:
  explicit ResourceLimitError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised by the coarse-stage extraction when no empirical mean reaches the
/// decision threshold. Callers treat the run as failed rather than guessing
/// a fallback estimate.
class NoThresholdCrossed : public std::runtime_error {
 public:
  explicit NoThresholdCrossed(const std::string& what) : std::runtime_error(what) {}
};

/// Raised by the fine-stage cell search when no rotation cell satisfies the
/// separation and quadrant conditions. Under the documented preconditions a
/// qualifying cell always exists, so this signals a precondition violation.
class NoQualifyingCell : public std::runtime_error {
 public:
  explicit NoQualifyingCell(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when an operation's stated preconditions are detectably violated.
class PreconditionViolation : public std::invalid_argument {
 public:
  explicit PreconditionViolation(const std::string& what) : std::invalid_argument(what) {}
};

/// File-system failure with the path in the message.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qcount
