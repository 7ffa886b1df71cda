// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>

#include "lwdock/specgen.hpp"

namespace lwdock {

/// Labels every text in `data` by running `command` once through the shell.
/// The command reads one {"text": ...} JSON object per line on stdin and must
/// print exactly one integer label per line, in order. The labels are cached,
/// so the returned labeler never spawns another process.
ModelLabeler external_labeler(const std::string& command, std::span<const LabeledExample> data);

}  // namespace lwdock
