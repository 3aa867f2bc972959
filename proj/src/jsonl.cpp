// SPDX-License-Identifier: Apache-2.0

#include "combo/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "combo/errors.hpp"

namespace combo {

std::vector<LineError> for_each_jsonl(const std::filesystem::path& path,
                                      const std::function<void(const Json&, std::size_t)>& on_record) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  std::vector<LineError> errors;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      on_record(Json::parse(line), line_no);
    } catch (const std::exception& e) {
      errors.push_back({line_no, e.what()});
    }
  }
  if (in.bad()) throw IoError("read failure on " + path.string());
  return errors;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records) {
  std::ostringstream out;
  for (const auto& r : records) out << r.dump() << '\n';
  write_text_file(path, out.str());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << contents;
  out.flush();
  if (!out) throw IoError("write failure on " + path.string());
}

}  // namespace combo
