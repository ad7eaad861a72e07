#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vds {

enum class ErrorCode {
  Io,
  BadMagic,
  UnsupportedVersion,
  Truncated,
  BadHeader,
  ShapeMismatch,
  NonFinite,
  InvalidBundle,
  InvalidArgument,
  UnknownClass,
  ZeroVector,
  InvalidMode,
  SvdNonConvergence,
  NonFiniteIntermediate,
  Diverged,
};

std::string_view to_string(ErrorCode code);

// Numerical failures (as opposed to bad input data) map to a distinct CLI exit code.
bool is_numerical(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vds
