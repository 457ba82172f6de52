#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "cvsketch/cvsketch.hpp"

// Runs `stmt` and checks it throws cvsketch::Error of the given kind.
#define EXPECT_ERROR_KIND(stmt, k)                                              \
  do {                                                                          \
    try {                                                                       \
      stmt;                                                                     \
      ADD_FAILURE() << "expected " << cvsketch::to_string(k) << ", no throw";   \
    } catch (const cvsketch::Error& e_) {                                       \
      EXPECT_EQ(e_.kind(), k) << e_.what();                                     \
    }                                                                           \
  } while (0)

namespace testutil {

inline std::string fixture(const std::string& name) {
  return (std::filesystem::path(CVSKETCH_FIXTURES) / name).string();
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline cvsketch::Rational rational(const std::string& text) {
  const auto slash = text.find('/');
  return cvsketch::Rational(cvsketch::BigInt(text.substr(0, slash)),
                            cvsketch::BigInt(text.substr(slash + 1)));
}

// Fresh scratch directory under the build tree's temp area.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("cvsketch_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil

namespace testutil {

inline long long ll(cvsketch::Wide v) { return static_cast<long long>(v); }

}  // namespace testutil
