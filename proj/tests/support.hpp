#pragma once

#include <stdlib.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>

namespace testsupport {

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "thinkstage-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::size_t occurrences(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

// Grammar check written independently of the parser: each tag exactly once
// and the whole string matching the block pattern.
inline bool oracle_well_formed(const std::string& s, std::string* think = nullptr, std::string* answer = nullptr) {
  for (const char* tag : {"<think>", "</think>", "<answer>", "</answer>"})
    if (occurrences(s, tag) != 1) return false;
  static const std::regex re(R"(^\s*<think>([\s\S]*)</think>\s*<answer>([\s\S]*)</answer>\s*$)");
  std::smatch m;
  if (!std::regex_match(s, m, re)) return false;
  if (think) *think = m[1];
  if (answer) *answer = m[2];
  return true;
}

}  // namespace testsupport
