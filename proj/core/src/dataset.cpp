// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#include "lwdock/dataset.hpp"

#include <nlohmann/json.hpp>

#include "lwdock/error.hpp"
#include "lwdock/registry.hpp"

namespace lwdock {

std::vector<LabeledExample> parse_jsonl(std::string_view content) {
  std::vector<LabeledExample> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    const std::size_t end = std::min(content.find('\n', pos), content.size());
    std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    const auto where = "line " + std::to_string(line_no);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::kBadRequest, where + ": not a JSON object");
    if (!j.contains("text") || !j["text"].is_string()) throw Error(ErrorCode::kBadRequest, where + ": missing string 'text'");
    if (!j.contains("label") || !j["label"].is_number_integer()) {
      throw Error(ErrorCode::kBadRequest, where + ": missing integer 'label'");
    }
    if (j["label"].get<long long>() < 0) throw Error(ErrorCode::kLabelOutOfRange, where + ": negative label");
    out.push_back(LabeledExample{j["text"].get<std::string>(), j["label"].get<std::size_t>()});
  }
  return out;
}

std::string to_jsonl(const std::vector<LabeledExample>& examples) {
  std::string out;
  for (const LabeledExample& ex : examples) {
    out += nlohmann::json{{"label", ex.label}, {"text", ex.text}}.dump();
    out += '\n';
  }
  return out;
}

std::vector<LabeledExample> read_jsonl(const std::filesystem::path& path) { return parse_jsonl(read_file(path)); }

void write_jsonl(const std::filesystem::path& path, const std::vector<LabeledExample>& examples) {
  write_file_atomic(path, to_jsonl(examples));
}

}  // namespace lwdock
