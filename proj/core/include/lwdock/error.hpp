// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lwdock {

/// Every failure the library can raise. The kebab-case spelling returned by
/// `to_string` is the stable, user-visible identifier.
enum class ErrorCode {
  kInvalidConfig,
  kEmptyText,
  kShapeMismatch,
  kLabelOutOfRange,
  kEmptyBatch,
  kStepOutOfRange,
  kNanInGradient,
  kEmptyDataset,
  kAnchorMismatch,
  kCorruptIndex,
  kDimMismatch,
  kZeroVectorSpec,
  kInvalidSpec,
  kBadMagic,
  kTruncated,
  kHeaderJsonInvalid,
  kPayloadLengthMismatch,
  kNotFound,
  kLengthMismatch,
  kZeroVector,
  kInvalidDims,
  kBadRequest,
  kIo,
  kInternal,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix that what() carries.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace lwdock
