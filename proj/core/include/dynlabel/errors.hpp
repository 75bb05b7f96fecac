// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dynlabel {

enum class ErrorCode : std::uint8_t {
  kOutOfRange,
  kDegenerateRay,
  kNoPlane,
  kMisalignedSequences,
  kBadMagic,
  kUnsupportedVersion,
  kTruncatedFile,
  kIo,
  kInvalidConfig,
  kInvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` distinguishes the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// Validation failures map to exit code 1, everything I/O-shaped to 2.
  bool is_io() const noexcept {
    switch (code_) {
      case ErrorCode::kIo:
      case ErrorCode::kBadMagic:
      case ErrorCode::kUnsupportedVersion:
      case ErrorCode::kTruncatedFile:
        return true;
      default:
        return false;
    }
  }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kDegenerateRay: return "DegenerateRay";
    case ErrorCode::kNoPlane: return "NoPlane";
    case ErrorCode::kMisalignedSequences: return "MisalignedSequences";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kUnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace dynlabel
