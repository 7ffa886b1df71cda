// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include <gtest/gtest.h>

#include "lwdock/dataset.hpp"
#include "lwdock/digest.hpp"
#include "lwdock/registry.hpp"
#include "lwdock/spec.hpp"
#include "test_support.hpp"

namespace lwdock {
namespace {

using testing::derived;
using testing::small_config;

std::string golden_bytes() {
  std::ifstream in(std::string(LWDOCK_FIXTURE_DIR) + "/golden_small.lws", std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Specification golden_spec() {
  AnchorConfig cfg = small_config(1);
  Specification s;
  s.header.anchor_id = anchor_id(cfg);
  s.header.spec_dim = cfg.spec_dim();
  s.header.rank = cfg.rank;
  s.header.lora_alpha = cfg.lora_alpha;
  s.header.target_modules = cfg.target_modules;
  s.header.mode = SpecMode::kDeveloper;
  s.header.created_unix_ms = 1767225600000;
  for (std::size_t i = 0; i < cfg.spec_dim(); ++i) s.vector.push_back(0.5f * static_cast<float>(i) - 3.0f);
  return s;
}

void put_u32(std::string& bytes, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes[at + i] = static_cast<char>((v >> (8 * i)) & 0xFF);
}

TEST(Codec, MatchesIndependentGoldenFile) {
  const std::string golden = golden_bytes();
  ASSERT_FALSE(golden.empty());
  EXPECT_EQ(write_spec_file(golden_spec()), golden);
  const Specification parsed = read_spec_file(golden);
  EXPECT_EQ(parsed, golden_spec());
  EXPECT_EQ(to_json(parsed.header), derived()["golden_small_header"]);
}

TEST(Codec, LayoutIsMagicLengthHeaderPayload) {
  const Specification s = golden_spec();
  const std::string bytes = write_spec_file(s);
  EXPECT_EQ(bytes.substr(0, 8), "LWSPEC01");
  const std::uint32_t h = static_cast<unsigned char>(bytes[8]) | static_cast<unsigned char>(bytes[9]) << 8 |
                          static_cast<unsigned char>(bytes[10]) << 16 |
                          static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[11])) << 24;
  EXPECT_EQ(bytes.size(), 12 + h + 4 * s.vector.size());
  EXPECT_EQ(bytes.substr(12, h), to_json(s.header).dump());
  float first = 0.0f;
  std::memcpy(&first, bytes.data() + 12 + h, 4);
  static_assert(std::endian::native == std::endian::little);
  EXPECT_EQ(first, -3.0f);
}

TEST(Codec, RandomizedRoundTripsAreByteIdentical) {
  Rng rng(2026);
  for (int i = 0; i < 1000; ++i) {
    AnchorConfig cfg = small_config(rng.next_u64());
    cfg.embed_dim = 1 + rng.below(24);
    cfg.rank = 1 + rng.below(cfg.embed_dim);
    cfg.lora_alpha = 0.5 + static_cast<double>(rng.below(640)) / 10.0;
    Specification s = testing::random_spec(cfg, rng, rng.below(2) ? SpecMode::kUser : SpecMode::kDeveloper);
    s.header.created_unix_ms = static_cast<std::int64_t>(rng.below(1ULL << 45));
    // Include signed zeros, subnormals and extremes.
    s.vector[0] = -0.0f;
    if (s.vector.size() > 2) {
      s.vector[1] = std::numeric_limits<float>::denorm_min();
      s.vector[2] = std::numeric_limits<float>::max();
    }
    const std::string bytes = write_spec_file(s);
    const Specification back = read_spec_file(bytes);
    ASSERT_EQ(back.header, s.header);
    ASSERT_EQ(std::memcmp(back.vector.data(), s.vector.data(), 4 * s.vector.size()), 0);
    ASSERT_EQ(write_spec_file(back), bytes);
  }
}

TEST(Codec, BadMagic) {
  std::string bytes = write_spec_file(golden_spec());
  bytes.replace(0, 8, "LWSPEC99");
  EXPECT_LWDOCK_ERROR(read_spec_file(bytes), ErrorCode::kBadMagic);
  EXPECT_LWDOCK_ERROR(read_spec_file("GARBAGE!xxxx"), ErrorCode::kBadMagic);
}

TEST(Codec, Truncation) {
  const std::string bytes = write_spec_file(golden_spec());
  EXPECT_LWDOCK_ERROR(read_spec_file(""), ErrorCode::kTruncated);
  EXPECT_LWDOCK_ERROR(read_spec_file(bytes.substr(0, 5)), ErrorCode::kTruncated);
  EXPECT_LWDOCK_ERROR(read_spec_file(bytes.substr(0, 10)), ErrorCode::kTruncated);
  EXPECT_LWDOCK_ERROR(read_spec_file(bytes.substr(0, 40)), ErrorCode::kTruncated);
}

TEST(Codec, PayloadLengthMismatch) {
  const std::string bytes = write_spec_file(golden_spec());
  EXPECT_LWDOCK_ERROR(read_spec_file(bytes.substr(0, bytes.size() - 4)), ErrorCode::kPayloadLengthMismatch);
  EXPECT_LWDOCK_ERROR(read_spec_file(bytes.substr(0, bytes.size() - 1)), ErrorCode::kPayloadLengthMismatch);
  EXPECT_LWDOCK_ERROR(read_spec_file(bytes + std::string(4, '\0')), ErrorCode::kPayloadLengthMismatch);
}

TEST(Codec, HeaderJsonInvalid) {
  const Specification s = golden_spec();
  auto with_header = [&](const std::string& header) {
    std::string out = "LWSPEC01....";
    put_u32(out, 8, static_cast<std::uint32_t>(header.size()));
    out += header;
    out.append(4 * s.vector.size(), '\0');
    return out;
  };
  EXPECT_LWDOCK_ERROR(read_spec_file(with_header("{not json")), ErrorCode::kHeaderJsonInvalid);
  EXPECT_LWDOCK_ERROR(read_spec_file(with_header("[]")), ErrorCode::kHeaderJsonInvalid);
  nlohmann::json h = to_json(s.header);
  h["mode"] = "teacher";
  EXPECT_LWDOCK_ERROR(read_spec_file(with_header(h.dump())), ErrorCode::kHeaderJsonInvalid);
  h = to_json(s.header);
  h.erase("rank");
  EXPECT_LWDOCK_ERROR(read_spec_file(with_header(h.dump())), ErrorCode::kHeaderJsonInvalid);
  h = to_json(s.header);
  h["dtype"] = "f16";
  EXPECT_LWDOCK_ERROR(read_spec_file(with_header(h.dump())), ErrorCode::kHeaderJsonInvalid);
  // Non-canonical whitespace would break write(read(b)) == b.
  EXPECT_LWDOCK_ERROR(read_spec_file(with_header(to_json(s.header).dump(1))), ErrorCode::kHeaderJsonInvalid);
}

TEST(Codec, WriterRejectsInconsistentSpec) {
  Specification s = golden_spec();
  s.vector.pop_back();
  EXPECT_LWDOCK_ERROR(write_spec_file(s), ErrorCode::kDimMismatch);
}

TEST(Codec, ZeroVectorDetection) {
  EXPECT_TRUE(is_zero_vector({0.0f, -0.0f, 0.0f}));
  EXPECT_FALSE(is_zero_vector({0.0f, 1e-30f}));
}

TEST(Digest, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(base64_encode("foobar"), "Zm9vYmFy");
  EXPECT_EQ(base64_encode("fo"), "Zm8=");
  EXPECT_EQ(base64_decode("Zm9vYg=="), "foob");
  EXPECT_LWDOCK_ERROR(base64_decode("@@@"), ErrorCode::kBadRequest);
  const std::string golden = golden_bytes();
  EXPECT_EQ(base64_decode(base64_encode(golden)), golden);
}

TEST(Dataset, JsonlRoundTripAndErrors) {
  const std::vector<LabeledExample> data{{"hello", 1}, {"quote \" and \xC3\xA9", 0}, {"tab\there", 3}};
  const std::string text = to_jsonl(data);
  EXPECT_EQ(parse_jsonl(text), data);
  EXPECT_EQ(parse_jsonl("\n" + text + "\n\n"), data);
  EXPECT_LWDOCK_ERROR(parse_jsonl("{\"text\": 1, \"label\": 0}\n"), ErrorCode::kBadRequest);
  EXPECT_LWDOCK_ERROR(parse_jsonl("{\"text\": \"a\"}\n"), ErrorCode::kBadRequest);
  EXPECT_LWDOCK_ERROR(parse_jsonl("not json\n"), ErrorCode::kBadRequest);
  EXPECT_LWDOCK_ERROR(parse_jsonl("{\"text\": \"a\", \"label\": -1}\n"), ErrorCode::kLabelOutOfRange);
}

}  // namespace
}  // namespace lwdock
