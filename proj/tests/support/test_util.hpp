#pragma once

#include <atomic>
#include <filesystem>
#include <string>

namespace offemma::testsupport {

inline std::filesystem::path source_dir() {
  return std::filesystem::path(OFFEMMA_SOURCE_DIR);
}

inline std::filesystem::path data_dir() { return source_dir() / "data"; }

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("offemma_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace offemma::testsupport
