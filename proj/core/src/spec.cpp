// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#include "lwdock/spec.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "lwdock/error.hpp"

namespace lwdock {

namespace {

constexpr std::size_t kPrefixBytes = 12;

void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32_le(std::string_view bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  return v;
}

}  // namespace

std::string_view to_string(SpecMode mode) { return mode == SpecMode::kDeveloper ? "developer" : "user"; }

SpecMode spec_mode_from_string(std::string_view s) {
  if (s == "developer") return SpecMode::kDeveloper;
  if (s == "user") return SpecMode::kUser;
  throw Error(ErrorCode::kHeaderJsonInvalid, "mode must be 'developer' or 'user'");
}

nlohmann::json to_json(const SpecHeader& h) {
  return nlohmann::json{
      {"anchor_id", h.anchor_id},
      {"spec_dim", h.spec_dim},
      {"rank", h.rank},
      {"lora_alpha", h.lora_alpha},
      {"target_modules", h.target_modules},
      {"dtype", h.dtype},
      {"mode", std::string(to_string(h.mode))},
      {"created_unix_ms", h.created_unix_ms},
  };
}

SpecHeader spec_header_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || j.size() != 8) throw Error(ErrorCode::kHeaderJsonInvalid, "header must have exactly 8 fields");
    SpecHeader h;
    h.anchor_id = j.at("anchor_id").get<std::string>();
    h.spec_dim = j.at("spec_dim").get<std::size_t>();
    h.rank = j.at("rank").get<std::size_t>();
    h.lora_alpha = j.at("lora_alpha").get<double>();
    h.target_modules = j.at("target_modules").get<std::vector<std::string>>();
    h.dtype = j.at("dtype").get<std::string>();
    h.mode = spec_mode_from_string(j.at("mode").get<std::string>());
    h.created_unix_ms = j.at("created_unix_ms").get<std::int64_t>();
    if (!j.at("spec_dim").is_number_unsigned() || !j.at("rank").is_number_unsigned()) {
      throw Error(ErrorCode::kHeaderJsonInvalid, "spec_dim and rank must be unsigned integers");
    }
    if (h.dtype != "f32") throw Error(ErrorCode::kHeaderJsonInvalid, "dtype must be f32");
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kHeaderJsonInvalid, e.what());
  }
}

std::string write_spec_file(const Specification& spec) {
  static_assert(std::endian::native == std::endian::little, "binary32 payload is written in host order");
  if (spec.vector.size() != spec.header.spec_dim) {
    throw Error(ErrorCode::kDimMismatch, "vector length differs from header spec_dim");
  }
  const std::string header = to_json(spec.header).dump();
  std::string out;
  out.reserve(kPrefixBytes + header.size() + spec.vector.size() * sizeof(float));
  out.append(kSpecMagic);
  put_u32_le(out, static_cast<std::uint32_t>(header.size()));
  out.append(header);
  const auto* payload = reinterpret_cast<const char*>(spec.vector.data());
  out.append(payload, spec.vector.size() * sizeof(float));
  return out;
}

Specification read_spec_file(std::string_view bytes) {
  if (bytes.size() < kSpecMagic.size()) throw Error(ErrorCode::kTruncated, "file shorter than magic");
  if (bytes.substr(0, kSpecMagic.size()) != kSpecMagic) throw Error(ErrorCode::kBadMagic, "expected LWSPEC01");
  if (bytes.size() < kPrefixBytes) throw Error(ErrorCode::kTruncated, "missing header length");
  const std::size_t header_len = get_u32_le(bytes, kSpecMagic.size());
  if (bytes.size() < kPrefixBytes + header_len) throw Error(ErrorCode::kTruncated, "header extends past end of file");
  const std::string_view header_text = bytes.substr(kPrefixBytes, header_len);

  nlohmann::json j = nlohmann::json::parse(header_text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw Error(ErrorCode::kHeaderJsonInvalid, "header is not valid JSON");
  Specification spec;
  spec.header = spec_header_from_json(j);
  if (to_json(spec.header).dump() != header_text) {
    throw Error(ErrorCode::kHeaderJsonInvalid, "header is not in canonical form");
  }

  const std::string_view payload = bytes.substr(kPrefixBytes + header_len);
  if (payload.size() != spec.header.spec_dim * sizeof(float)) {
    throw Error(ErrorCode::kPayloadLengthMismatch, "payload holds " + std::to_string(payload.size()) +
                                                       " bytes, header declares " +
                                                       std::to_string(spec.header.spec_dim) + " floats");
  }
  spec.vector.resize(spec.header.spec_dim);
  std::memcpy(spec.vector.data(), payload.data(), payload.size());
  return spec;
}

bool is_zero_vector(const std::vector<float>& v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0F; });
}

}  // namespace lwdock
