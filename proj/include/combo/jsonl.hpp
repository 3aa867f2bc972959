// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace combo {

using Json = nlohmann::json;

/// One rejected line of a line-delimited input file.
struct LineError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

/// Calls `on_record` for every non-blank line parsed as JSON. Parse failures
/// and exceptions thrown by `on_record` are collected, never fatal.
/// Throws IoError if the file cannot be opened.
std::vector<LineError> for_each_jsonl(const std::filesystem::path& path,
                                      const std::function<void(const Json&, std::size_t)>& on_record);

/// Writes records one per line. Output is byte-stable for equal inputs.
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace combo
