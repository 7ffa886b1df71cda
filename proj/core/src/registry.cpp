// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#include "lwdock/registry.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include "lwdock/error.hpp"

namespace lwdock {

namespace fs = std::filesystem;

namespace {

constexpr const char* kAnchorFile = "anchor.json";
constexpr const char* kIndexFile = "index.json";
constexpr const char* kSpecDir = "specs";

[[noreturn]] void throw_io(const std::string& what, const fs::path& path) {
  throw Error(ErrorCode::kIo, what + " '" + path.string() + "': " + std::strerror(errno));
}

void fsync_dir(const fs::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

std::string spec_file_name(std::uint64_t id) { return std::string(kSpecDir) + "/" + std::to_string(id) + ".lws"; }

}  // namespace

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  const fs::path tmp = path.string() + ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw_io("cannot create", tmp);
  std::size_t written = 0;
  while (written < bytes.size()) {
    const ssize_t n = ::write(fd, bytes.data() + written, bytes.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      throw_io("cannot write", tmp);
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    ::close(fd);
    throw_io("cannot fsync", tmp);
  }
  ::close(fd);
  if (::rename(tmp.c_str(), path.c_str()) != 0) throw_io("cannot rename", tmp);
  fsync_dir(path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

AnchorDescriptor AnchorDescriptor::with_default_presets(const AnchorConfig& anchor) {
  AnchorDescriptor d;
  d.anchor = anchor;
  d.presets.emplace("toy", toy_preset());
  d.presets.emplace("paper", paper_preset());
  return d;
}

nlohmann::json to_json(const AnchorDescriptor& d) {
  nlohmann::json presets = nlohmann::json::object();
  for (const auto& [name, cfg] : d.presets) presets[name] = to_json(cfg);
  return nlohmann::json{{"anchor", to_json(d.anchor)}, {"anchor_id", d.anchor_id()}, {"presets", presets}};
}

AnchorDescriptor anchor_descriptor_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("anchor")) throw Error(ErrorCode::kInvalidConfig, "descriptor lacks 'anchor'");
  AnchorDescriptor d;
  d.anchor = anchor_config_from_json(j.at("anchor"));
  d.anchor.validate();
  if (j.contains("presets")) {
    for (const auto& [name, cfg] : j.at("presets").items()) d.presets.emplace(name, train_config_from_json(cfg));
  }
  return d;
}

nlohmann::json summary_json(const Learnware& lw) {
  return nlohmann::json{{"id", lw.id},
                        {"model_uri", lw.model_uri},
                        {"metadata", lw.metadata},
                        {"spec_dim", lw.spec.header.spec_dim},
                        {"mode", std::string(to_string(lw.spec.header.mode))}};
}

struct Registry::Impl {
  std::optional<fs::path> root;
  AnchorDescriptor descriptor;
  std::string anchor_id;
  mutable std::mutex write_mutex;
  mutable std::mutex snapshot_mutex;
  Snapshot current = std::make_shared<const std::vector<Learnware>>();
  std::uint64_t next_id = 1;

  Snapshot load() const {
    std::lock_guard lock(snapshot_mutex);
    return current;
  }

  void publish(Snapshot s) {
    std::lock_guard lock(snapshot_mutex);
    current = std::move(s);
  }

  void persist_index(const std::vector<Learnware>& entries, std::uint64_t next) const {
    if (!root) return;
    nlohmann::json list = nlohmann::json::array();
    for (const Learnware& lw : entries) {
      list.push_back({{"id", lw.id}, {"file", spec_file_name(lw.id)}, {"model_uri", lw.model_uri},
                      {"metadata", lw.metadata}});
    }
    const nlohmann::json index{{"anchor_id", anchor_id}, {"next_id", next}, {"learnwares", list}};
    write_file_atomic(*root / kIndexFile, index.dump(2) + "\n");
  }
};

Registry::Registry(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Registry::Registry(Registry&&) noexcept = default;
Registry& Registry::operator=(Registry&&) noexcept = default;
Registry::~Registry() = default;

Registry Registry::in_memory(const AnchorConfig& anchor) {
  anchor.validate();
  auto impl = std::make_unique<Impl>();
  impl->descriptor = AnchorDescriptor::with_default_presets(anchor);
  impl->anchor_id = impl->descriptor.anchor_id();
  return Registry(std::move(impl));
}

Registry Registry::open(const fs::path& data_dir, const std::optional<AnchorConfig>& anchor) {
  auto impl = std::make_unique<Impl>();
  impl->root = data_dir;
  const fs::path anchor_path = data_dir / kAnchorFile;
  const fs::path index_path = data_dir / kIndexFile;

  if (!fs::exists(anchor_path)) {
    if (!anchor) throw Error(ErrorCode::kInvalidConfig, "fresh registry '" + data_dir.string() + "' needs an anchor config");
    anchor->validate();
    fs::create_directories(data_dir / kSpecDir);
    impl->descriptor = AnchorDescriptor::with_default_presets(*anchor);
    impl->anchor_id = impl->descriptor.anchor_id();
    write_file_atomic(anchor_path, to_json(impl->descriptor).dump(2) + "\n");
    impl->persist_index({}, 1);
    return Registry(std::move(impl));
  }

  nlohmann::json anchor_json = nlohmann::json::parse(read_file(anchor_path), nullptr, false);
  if (anchor_json.is_discarded()) throw Error(ErrorCode::kCorruptIndex, "anchor.json is not valid JSON");
  impl->descriptor = anchor_descriptor_from_json(anchor_json);
  impl->anchor_id = impl->descriptor.anchor_id();
  if (anchor && lwdock::anchor_id(*anchor) != impl->anchor_id) {
    throw Error(ErrorCode::kAnchorMismatch, "registry was created with anchor " + impl->anchor_id);
  }
  fs::create_directories(data_dir / kSpecDir);

  auto entries = std::make_shared<std::vector<Learnware>>();
  if (!fs::exists(index_path)) {
    impl->persist_index({}, 1);
  } else {
    try {
      const nlohmann::json index = nlohmann::json::parse(read_file(index_path));
      if (index.at("anchor_id").get<std::string>() != impl->anchor_id) {
        throw Error(ErrorCode::kCorruptIndex, "index anchor_id differs from anchor.json");
      }
      impl->next_id = index.at("next_id").get<std::uint64_t>();
      for (const auto& item : index.at("learnwares")) {
        Learnware lw;
        lw.id = item.at("id").get<std::uint64_t>();
        lw.model_uri = item.at("model_uri").get<std::string>();
        lw.metadata = item.at("metadata").get<Metadata>();
        lw.spec = read_spec_file(read_file(data_dir / item.at("file").get<std::string>()));
        if (lw.spec.header.anchor_id != impl->anchor_id) {
          throw Error(ErrorCode::kCorruptIndex, "stored spec " + std::to_string(lw.id) + " has a foreign anchor");
        }
        if (lw.id >= impl->next_id) throw Error(ErrorCode::kCorruptIndex, "id beyond next_id");
        entries->push_back(std::move(lw));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kCorruptIndex, e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kCorruptIndex) throw;
      throw Error(ErrorCode::kCorruptIndex, e.what());
    }
    std::sort(entries->begin(), entries->end(), [](const Learnware& a, const Learnware& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < entries->size(); ++i) {
      if ((*entries)[i].id == (*entries)[i - 1].id) throw Error(ErrorCode::kCorruptIndex, "duplicate id");
    }
  }
  impl->current = std::move(entries);
  return Registry(std::move(impl));
}

const AnchorDescriptor& Registry::descriptor() const { return impl_->descriptor; }
const std::string& Registry::anchor_id() const { return impl_->anchor_id; }

void Registry::check_compatible(const Specification& spec) const {
  const SpecHeader& h = spec.header;
  const AnchorConfig& cfg = impl_->descriptor.anchor;
  if (spec.vector.size() != h.spec_dim) {
    throw Error(ErrorCode::kDimMismatch, "header spec_dim " + std::to_string(h.spec_dim) + " but vector holds " +
                                             std::to_string(spec.vector.size()) + " values");
  }
  if (h.anchor_id != impl_->anchor_id) {
    throw Error(ErrorCode::kAnchorMismatch, "spec anchor " + h.anchor_id + " differs from registry anchor " +
                                                impl_->anchor_id);
  }
  if (h.spec_dim != cfg.spec_dim()) {
    throw Error(ErrorCode::kDimMismatch, "registry expects spec_dim " + std::to_string(cfg.spec_dim()));
  }
  if (h.rank != cfg.rank || h.lora_alpha != cfg.lora_alpha || h.target_modules != cfg.target_modules) {
    throw Error(ErrorCode::kAnchorMismatch, "header LoRA shape differs from the registry anchor");
  }
  if (!std::all_of(spec.vector.begin(), spec.vector.end(), [](float v) { return std::isfinite(v); })) {
    throw Error(ErrorCode::kInvalidSpec, "specification contains non-finite values");
  }
  if (is_zero_vector(spec.vector)) {
    throw Error(ErrorCode::kZeroVectorSpec, "all-zero specification carries no information");
  }
}

std::uint64_t Registry::submit(const std::string& model_uri, const Specification& spec, const Metadata& metadata) {
  check_compatible(spec);
  std::lock_guard lock(impl_->write_mutex);
  const std::uint64_t id = impl_->next_id;
  Learnware lw{id, model_uri, spec, metadata};
  auto next = std::make_shared<std::vector<Learnware>>(*impl_->load());
  next->push_back(lw);
  if (impl_->root) {
    write_file_atomic(*impl_->root / spec_file_name(id), write_spec_file(spec));
    impl_->persist_index(*next, id + 1);
  }
  impl_->next_id = id + 1;
  impl_->publish(std::move(next));
  return id;
}

Learnware Registry::get(std::uint64_t id) const {
  const Snapshot s = impl_->load();
  const auto it = std::lower_bound(s->begin(), s->end(), id, [](const Learnware& lw, std::uint64_t v) { return lw.id < v; });
  if (it == s->end() || it->id != id) throw Error(ErrorCode::kNotFound, "no learnware with id " + std::to_string(id));
  return *it;
}

std::vector<Learnware> Registry::list() const { return *impl_->load(); }

std::size_t Registry::size() const { return impl_->load()->size(); }

void Registry::remove(std::uint64_t id) {
  std::lock_guard lock(impl_->write_mutex);
  const Snapshot s = impl_->load();
  auto next = std::make_shared<std::vector<Learnware>>();
  next->reserve(s->size());
  bool found = false;
  for (const Learnware& lw : *s) {
    if (lw.id == id) {
      found = true;
    } else {
      next->push_back(lw);
    }
  }
  if (!found) throw Error(ErrorCode::kNotFound, "no learnware with id " + std::to_string(id));
  if (impl_->root) {
    impl_->persist_index(*next, impl_->next_id);
    std::error_code ec;
    fs::remove(*impl_->root / spec_file_name(id), ec);
  }
  impl_->publish(std::move(next));
}

Registry::Snapshot Registry::snapshot() const { return impl_->load(); }

}  // namespace lwdock
