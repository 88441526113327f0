#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace test {

inline std::filesystem::path data(const std::string& rel) { return std::filesystem::path(ALPR_TEST_DATA) / rel; }

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh empty directory under the build tree.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("alpr_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace test
