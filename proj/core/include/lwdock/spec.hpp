// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace lwdock {

inline constexpr std::string_view kSpecMagic = "LWSPEC01";

enum class SpecMode { kDeveloper, kUser };

std::string_view to_string(SpecMode mode);
SpecMode spec_mode_from_string(std::string_view s);

struct SpecHeader {
  std::string anchor_id;
  std::size_t spec_dim = 0;
  std::size_t rank = 0;
  double lora_alpha = 0.0;
  std::vector<std::string> target_modules;
  std::string dtype{"f32"};
  SpecMode mode = SpecMode::kUser;
  std::int64_t created_unix_ms = 0;

  friend bool operator==(const SpecHeader&, const SpecHeader&) = default;
};

/// A parameter-vector specification: the flattened trained B factors
/// (row-major B_q, then B_k, then B_v) plus a compatibility header.
struct Specification {
  SpecHeader header;
  std::vector<float> vector;

  friend bool operator==(const Specification&, const Specification&) = default;
};

nlohmann::json to_json(const SpecHeader& header);
/// Throws Error(kHeaderJsonInvalid) on missing or mistyped fields.
SpecHeader spec_header_from_json(const nlohmann::json& j);

/// LWSPEC01 layout:
///   [0, 8)        ASCII magic "LWSPEC01"
///   [8, 12)       u32 little-endian header length H
///   [12, 12 + H)  UTF-8 JSON header, sorted keys, no whitespace
///   [12 + H, ..)  spec_dim IEEE-754 binary32 values, little-endian
///
/// Only canonical headers are accepted so that write(read(b)) == b.
std::string write_spec_file(const Specification& spec);
Specification read_spec_file(std::string_view bytes);

/// True when every component is exactly zero.
bool is_zero_vector(const std::vector<float>& v);

}  // namespace lwdock
