// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#include "lwdock/error.hpp"

namespace lwdock {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidConfig: return "invalid-config";
    case ErrorCode::kEmptyText: return "empty-text";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kLabelOutOfRange: return "label-out-of-range";
    case ErrorCode::kEmptyBatch: return "empty-batch";
    case ErrorCode::kStepOutOfRange: return "step-out-of-range";
    case ErrorCode::kNanInGradient: return "nan-in-gradient";
    case ErrorCode::kEmptyDataset: return "empty-dataset";
    case ErrorCode::kAnchorMismatch: return "anchor-mismatch";
    case ErrorCode::kCorruptIndex: return "corrupt-index";
    case ErrorCode::kDimMismatch: return "dim-mismatch";
    case ErrorCode::kZeroVectorSpec: return "zero-vector-spec";
    case ErrorCode::kInvalidSpec: return "invalid-spec";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kHeaderJsonInvalid: return "header-json-invalid";
    case ErrorCode::kPayloadLengthMismatch: return "payload-length-mismatch";
    case ErrorCode::kNotFound: return "not-found";
    case ErrorCode::kLengthMismatch: return "length-mismatch";
    case ErrorCode::kZeroVector: return "zero-vector";
    case ErrorCode::kInvalidDims: return "invalid-dims";
    case ErrorCode::kBadRequest: return "bad-request";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kInternal: return "internal";
  }
  return "internal";
}

}  // namespace lwdock
