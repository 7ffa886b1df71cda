// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#include "labeler.hpp"

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string_view>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "lwdock/error.hpp"
#include "lwdock/registry.hpp"

namespace lwdock {

namespace fs = std::filesystem;

namespace {

struct TempFile {
  fs::path path;
  ~TempFile() {
    std::error_code ec;
    fs::remove(path, ec);
  }
};

}  // namespace

ModelLabeler external_labeler(const std::string& command, std::span<const LabeledExample> data) {
  TempFile input{fs::temp_directory_path() / ("lwdock-labeler-" + std::to_string(::getpid()) + ".jsonl")};
  std::string lines;
  for (const LabeledExample& ex : data) lines += nlohmann::json{{"text", ex.text}}.dump() + "\n";
  write_file_atomic(input.path, lines);

  // The temp path contains only [A-Za-z0-9/._-], so no quoting is needed.
  const std::string full = "(" + command + ") < " + input.path.string();
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(::popen(full.c_str(), "r"), ::pclose);
  if (!pipe) throw Error(ErrorCode::kIo, "cannot run labeler: " + command);
  std::string out;
  char buf[4096];
  while (const std::size_t n = std::fread(buf, 1, sizeof buf, pipe.get())) out.append(buf, n);
  const int status = ::pclose(pipe.release());
  if (status != 0) throw Error(ErrorCode::kBadRequest, "labeler exited with status " + std::to_string(status));

  std::istringstream in(out);
  std::unordered_map<std::string, std::size_t> labels;
  std::size_t count = 0;
  for (long long label = 0; in >> label; ++count) {
    if (count >= data.size()) break;
    if (label < 0) throw Error(ErrorCode::kLabelOutOfRange, "labeler printed a negative label");
    labels.emplace(data[count].text, static_cast<std::size_t>(label));
  }
  if (count != data.size() || !(in >> std::ws).eof()) {
    throw Error(ErrorCode::kBadRequest, "labeler must print exactly " + std::to_string(data.size()) +
                                            " integer labels, one per input line");
  }
  return ModelLabeler{[labels = std::move(labels)](std::string_view text) {
    const auto it = labels.find(std::string(text));
    if (it == labels.end()) throw Error(ErrorCode::kInternal, "text was not pre-labeled");
    return it->second;
  }};
}

}  // namespace lwdock
