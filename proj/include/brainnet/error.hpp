#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace brainnet {

enum class ErrorCode {
  InvalidArgument,
  ShapeMismatch,
  IncompletePack,
  OutOfBounds,
  OutOfRange,
  RangeError,
  AllZero,
  UnknownPolicy,
  BadMagic,
  BadHeader,
  UnsupportedDatatype,
  TruncatedFile,
  BadLabel,
  NonFiniteValue,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::IncompletePack: return "IncompletePack";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::RangeError: return "RangeError";
    case ErrorCode::AllZero: return "AllZero";
    case ErrorCode::UnknownPolicy: return "UnknownPolicy";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::BadHeader: return "BadHeader";
    case ErrorCode::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::BadLabel: return "BadLabel";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can dispatch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace brainnet
