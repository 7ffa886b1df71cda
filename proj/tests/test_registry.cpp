// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>
#include <limits>
#include <regex>
#include <set>
#include <thread>
#include <type_traits>

#include <gtest/gtest.h>

#include "lwdock/registry.hpp"
#include "test_support.hpp"

namespace lwdock {
namespace {

using testing::random_spec;
using testing::small_config;
using testing::TempDir;

// Everything observable about a registry, as bytes.
std::string fingerprint(const Registry& reg) {
  std::string out = reg.anchor_id() + "\n";
  for (const Learnware& lw : reg.list()) out += summary_json(lw).dump() + write_spec_file(lw.spec) + "\n";
  return out;
}

TEST(Registry, FreshDirectoryNeedsAnchorAndPersistsIt) {
  TempDir dir;
  EXPECT_LWDOCK_ERROR(Registry::open(dir / "reg"), ErrorCode::kInvalidConfig);
  const AnchorConfig cfg;
  {
    Registry reg = Registry::open(dir / "reg", cfg);
    EXPECT_EQ(reg.size(), 0u);
    EXPECT_EQ(reg.anchor_id(), anchor_id(cfg));
  }
  EXPECT_TRUE(std::filesystem::exists(dir / "reg/anchor.json"));
  Registry again = Registry::open(dir / "reg");
  EXPECT_EQ(again.anchor_id(), anchor_id(cfg));
  EXPECT_EQ(again.descriptor().presets.at("toy"), toy_preset());
  EXPECT_EQ(again.descriptor().presets.at("paper"), paper_preset());
}

TEST(Registry, ReopenWithDifferentAnchorIsRejected) {
  TempDir dir;
  AnchorConfig cfg;
  { Registry reg = Registry::open(dir.path(), cfg); }
  EXPECT_NO_THROW(Registry::open(dir.path(), cfg));
  cfg.base_seed += 1;
  EXPECT_LWDOCK_ERROR(Registry::open(dir.path(), cfg), ErrorCode::kAnchorMismatch);
}

TEST(Registry, SubmitAssignsIdsFromOneAndSurvivesReopen) {
  TempDir dir;
  const AnchorConfig cfg = small_config();
  Rng rng(1);
  std::string before;
  {
    Registry reg = Registry::open(dir.path(), cfg);
    EXPECT_EQ(reg.submit("uri://a", random_spec(cfg, rng), {{"name", "a"}}), 1u);
    EXPECT_EQ(reg.submit("uri://b", random_spec(cfg, rng)), 2u);
    EXPECT_EQ(reg.submit("uri://c", random_spec(cfg, rng), {{"domain", "finance"}}), 3u);
    before = fingerprint(reg);
  }
  Registry reg = Registry::open(dir.path());
  ASSERT_EQ(reg.size(), 3u);
  EXPECT_EQ(reg.get(2).model_uri, "uri://b");
  EXPECT_EQ(reg.get(3).metadata.at("domain"), "finance");
  EXPECT_EQ(fingerprint(reg), before);
}

TEST(Registry, SubmitValidation) {
  const AnchorConfig cfg = small_config();
  Registry reg = Registry::in_memory(cfg);
  Rng rng(2);
  Specification s = random_spec(cfg, rng);
  Specification zero = s;
  std::fill(zero.vector.begin(), zero.vector.end(), 0.0f);
  EXPECT_LWDOCK_ERROR(reg.submit("u", zero), ErrorCode::kZeroVectorSpec);
  Specification shortened = s;
  shortened.vector.resize(s.vector.size() - 3);
  EXPECT_LWDOCK_ERROR(reg.submit("u", shortened), ErrorCode::kDimMismatch);
  Specification foreign = s;
  foreign.header.anchor_id = anchor_id(small_config(99));
  EXPECT_LWDOCK_ERROR(reg.submit("u", foreign), ErrorCode::kAnchorMismatch);
  Specification nan = s;
  nan.vector[4] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_LWDOCK_ERROR(reg.submit("u", nan), ErrorCode::kInvalidSpec);
  EXPECT_EQ(reg.size(), 0u);
  EXPECT_EQ(reg.submit("u", s), 1u);
}

TEST(Registry, DefaultConfigDimMismatchExample) {
  const AnchorConfig cfg;
  Registry reg = Registry::in_memory(cfg);
  Rng rng(3);
  Specification s = random_spec(cfg, rng);
  s.vector.resize(3000);
  EXPECT_LWDOCK_ERROR(reg.submit("u", s), ErrorCode::kDimMismatch);
}

TEST(Registry, GetListRemove) {
  const AnchorConfig cfg = small_config();
  Registry reg = Registry::in_memory(cfg);
  Rng rng(4);
  for (int i = 0; i < 5; ++i) reg.submit("u" + std::to_string(i), random_spec(cfg, rng));
  reg.remove(2);
  reg.remove(4);
  std::vector<std::uint64_t> ids;
  for (const Learnware& lw : reg.list()) ids.push_back(lw.id);
  EXPECT_EQ(ids, (std::vector<std::uint64_t>{1, 3, 5}));
  EXPECT_LWDOCK_ERROR(reg.get(2), ErrorCode::kNotFound);
  EXPECT_LWDOCK_ERROR(reg.remove(2), ErrorCode::kNotFound);
  EXPECT_LWDOCK_ERROR(reg.get(42), ErrorCode::kNotFound);
}

TEST(Registry, IdsAreNeverReused) {
  TempDir dir;
  const AnchorConfig cfg = small_config();
  Rng rng(5);
  {
    Registry reg = Registry::open(dir.path(), cfg);
    reg.submit("a", random_spec(cfg, rng));
    reg.submit("b", random_spec(cfg, rng));
    reg.remove(2);
    EXPECT_EQ(reg.submit("c", random_spec(cfg, rng)), 3u);
    reg.remove(3);
  }
  Registry reg = Registry::open(dir.path());
  EXPECT_EQ(reg.submit("d", random_spec(cfg, rng)), 4u);
}

TEST(Registry, DurabilityUnderRandomOperationSequences) {
  const AnchorConfig cfg = small_config();
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    TempDir dir;
    Rng rng(seed);
    std::string expected;
    {
      Registry reg = Registry::open(dir.path(), cfg);
      for (int op = 0; op < 30; ++op) {
        const auto live = reg.list();
        if (!live.empty() && rng.below(3) == 0) {
          reg.remove(live[rng.below(live.size())].id);
        } else {
          reg.submit("uri://" + std::to_string(op), random_spec(cfg, rng, SpecMode::kUser),
                     {{"op", std::to_string(op)}});
        }
      }
      expected = fingerprint(reg);
    }
    EXPECT_EQ(fingerprint(Registry::open(dir.path())), expected) << "seed " << seed;
    EXPECT_EQ(fingerprint(Registry::open(dir.path(), cfg)), expected) << "seed " << seed;
  }
}

TEST(Registry, CorruptIndexIsDetected) {
  TempDir dir;
  const AnchorConfig cfg = small_config();
  Rng rng(6);
  {
    Registry reg = Registry::open(dir.path(), cfg);
    reg.submit("a", random_spec(cfg, rng));
  }
  { std::ofstream(dir / "index.json") << "{ this is not json"; }
  EXPECT_LWDOCK_ERROR(Registry::open(dir.path()), ErrorCode::kCorruptIndex);
}

TEST(Registry, MissingSpecFileIsCorruption) {
  TempDir dir;
  const AnchorConfig cfg = small_config();
  Rng rng(7);
  {
    Registry reg = Registry::open(dir.path(), cfg);
    reg.submit("a", random_spec(cfg, rng));
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir / "specs")) std::filesystem::remove(entry);
  EXPECT_THROW(Registry::open(dir.path()), Error);
}

TEST(Registry, ConcurrentSubmitsGetUniqueMonotoneIds) {
  TempDir dir;
  const AnchorConfig cfg = small_config();
  Registry reg = Registry::open(dir.path(), cfg);
  constexpr int kThreads = 4;
  constexpr int kPerThread = 15;
  std::vector<std::vector<std::uint64_t>> got(kThreads);
  std::atomic<bool> stop_readers{false};
  std::atomic<bool> reader_failed{false};
  std::thread reader([&] {
    while (!stop_readers) {
      const auto snap = reg.snapshot();
      for (std::size_t i = 1; i < snap->size(); ++i) {
        if ((*snap)[i - 1].id >= (*snap)[i].id) reader_failed = true;
      }
    }
  });
  std::vector<std::thread> writers;
  for (int t = 0; t < kThreads; ++t) {
    writers.emplace_back([&, t] {
      Rng rng(100 + t);
      for (int i = 0; i < kPerThread; ++i) got[t].push_back(reg.submit("t", random_spec(cfg, rng)));
    });
  }
  for (auto& w : writers) w.join();
  stop_readers = true;
  reader.join();
  EXPECT_FALSE(reader_failed);
  std::set<std::uint64_t> all;
  for (const auto& ids : got) {
    for (std::size_t i = 1; i < ids.size(); ++i) EXPECT_LT(ids[i - 1], ids[i]);
    all.insert(ids.begin(), ids.end());
  }
  EXPECT_EQ(all.size(), static_cast<std::size_t>(kThreads * kPerThread));
  EXPECT_EQ(*all.begin(), 1u);
  EXPECT_EQ(*all.rbegin(), static_cast<std::uint64_t>(kThreads * kPerThread));
  EXPECT_EQ(Registry::open(dir.path()).size(), all.size());
}

TEST(AnchorDescriptor, JsonRoundTripAndTamperDetection) {
  AnchorConfig cfg;
  cfg.base_seed = 77;
  const AnchorDescriptor d = AnchorDescriptor::with_default_presets(cfg);
  const nlohmann::json j = to_json(d);
  EXPECT_EQ(j.at("anchor_id"), anchor_id(cfg));
  const AnchorDescriptor back = anchor_descriptor_from_json(j);
  EXPECT_EQ(back.anchor, cfg);
  EXPECT_EQ(back.anchor_id(), d.anchor_id());
  EXPECT_EQ(back.presets, d.presets);
  // Two parties regenerating A from the descriptor agree bit for bit.
  EXPECT_EQ(frozen_bytes(init_adapter(back.anchor)), frozen_bytes(init_adapter(cfg)));

  nlohmann::json tampered = j;
  tampered["anchor"]["lora_seed"] = 4242;
  const AnchorDescriptor t = anchor_descriptor_from_json(tampered);
  EXPECT_NE(t.anchor_id(), d.anchor_id());  // stored id is ignored, recomputed
  Registry reg = Registry::in_memory(cfg);
  Specification spec = make_specification(t.anchor, init_adapter(t.anchor), SpecMode::kDeveloper);
  spec.vector[0] = 1.0f;
  EXPECT_LWDOCK_ERROR(reg.submit("u", spec), ErrorCode::kAnchorMismatch);
}

// The dock only ever receives specification bytes, URIs and metadata. This
// audit reads the public headers of the dock-facing modules and fails if any
// declaration mentions a raw-data type.
TEST(PrivacyBoundary, DockSurfaceAcceptsNoRawExamples) {
  const std::regex raw_types(R"(\b(LabeledExample|Sample|TokenSeq|parse_jsonl|read_jsonl)\b)");
  for (const char* header : {"registry.hpp", "service.hpp", "identify.hpp"}) {
    std::ifstream in(std::string(LWDOCK_INCLUDE_DIR) + "/lwdock/" + header);
    ASSERT_TRUE(in) << header;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find("///") != std::string::npos || line.find("//") == 0) continue;
      EXPECT_FALSE(std::regex_search(line, raw_types)) << header << ":" << lineno << ": " << line;
    }
  }
  static_assert(std::is_invocable_r_v<std::uint64_t, decltype(&Registry::submit), Registry&, const std::string&,
                                      const Specification&, const Metadata&>);
}

}  // namespace
}  // namespace lwdock
