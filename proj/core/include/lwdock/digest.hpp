// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

namespace lwdock {

/// Lower-case hex SHA-256 of the input bytes.
std::string sha256_hex(std::string_view bytes);

std::string base64_encode(std::string_view bytes);
/// Throws Error(kBadRequest) on malformed input.
std::string base64_decode(std::string_view text);

}  // namespace lwdock
