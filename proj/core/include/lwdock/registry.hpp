// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lwdock/anchor.hpp"
#include "lwdock/spec.hpp"
#include "lwdock/specgen.hpp"

namespace lwdock {

/// What the dock hands to developers and users so they can regenerate the
/// anchor and its frozen A matrices locally.
struct AnchorDescriptor {
  AnchorConfig anchor;
  std::map<std::string, TrainConfig> presets;

  static AnchorDescriptor with_default_presets(const AnchorConfig& anchor);
  std::string anchor_id() const { return lwdock::anchor_id(anchor); }
};

nlohmann::json to_json(const AnchorDescriptor& d);
/// The anchor_id is always recomputed from the config; a stored id is ignored.
AnchorDescriptor anchor_descriptor_from_json(const nlohmann::json& j);

using Metadata = std::map<std::string, std::string>;

/// A model reference plus its specification. The dock never dereferences model_uri.
struct Learnware {
  std::uint64_t id = 0;
  std::string model_uri;
  Specification spec;
  Metadata metadata;
};

nlohmann::json summary_json(const Learnware& lw);

/// Persistent learnware store.
///
/// On-disk layout under data_dir:
///   anchor.json       descriptor written on first open
///   index.json        next id and per-learnware uri / metadata / file name
///   specs/{id}.lws    LWSPEC01 specification files
///
/// Every file is replaced by write-to-temp, fsync, rename. Writers are
/// serialized; readers take an immutable snapshot and never see a partial write.
class Registry {
 public:
  using Snapshot = std::shared_ptr<const std::vector<Learnware>>;

  /// Opens or creates a registry. A fresh directory requires an anchor config;
  /// an existing one rejects a config that differs from the stored one.
  static Registry open(const std::filesystem::path& data_dir, const std::optional<AnchorConfig>& anchor = {});
  /// Non-persistent registry, used by the benchmark harness.
  static Registry in_memory(const AnchorConfig& anchor);

  Registry(Registry&&) noexcept;
  Registry& operator=(Registry&&) noexcept;
  ~Registry();

  const AnchorDescriptor& descriptor() const;
  const std::string& anchor_id() const;

  std::uint64_t submit(const std::string& model_uri, const Specification& spec, const Metadata& metadata = {});
  Learnware get(std::uint64_t id) const;
  /// Ascending by id.
  std::vector<Learnware> list() const;
  void remove(std::uint64_t id);
  std::size_t size() const;

  Snapshot snapshot() const;

  /// Throws kDimMismatch, kAnchorMismatch, kInvalidSpec or kZeroVectorSpec
  /// when the spec cannot be compared against this registry's entries.
  void check_compatible(const Specification& spec) const;

 private:
  struct Impl;
  explicit Registry(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

/// Writes bytes to path atomically (temp file, fsync, rename).
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace lwdock
