#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "support.hpp"

namespace maxfb::test {

std::string scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "maxfb_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace maxfb::test
