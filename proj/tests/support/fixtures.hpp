#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "dsq/catalog.hpp"

namespace dsq::testing {

inline std::filesystem::path fixture_dir() { return DSQ_FIXTURE_DIR; }

/// Switches the working directory for the lifetime of the object, so
/// relative source locations in fixture catalogs resolve.
class ScopedCwd {
 public:
  explicit ScopedCwd(const std::filesystem::path& dir) : saved_(std::filesystem::current_path()) {
    std::filesystem::current_path(dir);
  }
  ~ScopedCwd() { std::filesystem::current_path(saved_); }
  ScopedCwd(const ScopedCwd&) = delete;
  ScopedCwd& operator=(const ScopedCwd&) = delete;

 private:
  std::filesystem::path saved_;
};

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::mt19937_64 rng{std::random_device{}()};
  auto dir = std::filesystem::temp_directory_path() / ("dsq-" + tag + "-" + std::to_string(rng()));
  std::filesystem::create_directories(dir);
  return dir;
}

inline Catalog fixture_catalog() { return load(fixture_dir() / "catalog.json"); }

}  // namespace dsq::testing
