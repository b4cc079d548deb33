#include "orthant/error.hpp"

namespace orthant {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::SingularAnchor: return "SingularAnchor";
    case ErrorCode::AcceptanceTooLow: return "AcceptanceTooLow";
    case ErrorCode::DimensionUnsupported: return "DimensionUnsupported";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::InsufficientMass: return "InsufficientMass";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::DuplicateDesignPoints: return "DuplicateDesignPoints";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace orthant
