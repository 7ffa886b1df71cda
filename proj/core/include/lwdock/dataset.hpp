// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lwdock/anchor.hpp"

namespace lwdock {

/// Parses JSONL, one {"text": string, "label": integer} object per line.
/// Blank lines are skipped. Throws Error(kBadRequest) naming the bad line.
std::vector<LabeledExample> parse_jsonl(std::string_view content);
std::string to_jsonl(const std::vector<LabeledExample>& examples);

std::vector<LabeledExample> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<LabeledExample>& examples);

}  // namespace lwdock
