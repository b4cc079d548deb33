#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace orthant {

enum class ErrorCode {
  InvalidArgument,
  NotPositiveDefinite,
  SingularAnchor,
  AcceptanceTooLow,
  DimensionUnsupported,
  ZeroVariance,
  InsufficientMass,
  DegenerateVariance,
  DuplicateDesignPoints,
  Io,
};

[[nodiscard]] std::string_view to_string(ErrorCode code) noexcept;

/// Every recoverable failure in the library is reported as an `Error`
/// carrying a stable machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace orthant
