#include "vds/error.hpp"

namespace vds {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io: return "Io";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::BadHeader: return "BadHeader";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::InvalidBundle: return "InvalidBundle";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnknownClass: return "UnknownClass";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::InvalidMode: return "InvalidMode";
    case ErrorCode::SvdNonConvergence: return "SvdNonConvergence";
    case ErrorCode::NonFiniteIntermediate: return "NonFiniteIntermediate";
    case ErrorCode::Diverged: return "DivergedAtStep";
  }
  return "Unknown";
}

bool is_numerical(ErrorCode code) {
  return code == ErrorCode::SvdNonConvergence || code == ErrorCode::NonFiniteIntermediate ||
         code == ErrorCode::Diverged;
}

}  // namespace vds
