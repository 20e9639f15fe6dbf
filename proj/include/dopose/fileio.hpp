#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace dopose {

std::string read_text_file(const std::filesystem::path &path);

// Writes to `<path>.tmp.<pid>.<n>` and renames over `path`, so readers never
// observe a partially written file. Parent directories are created.
void write_file_atomic(const std::filesystem::path &path, std::string_view contents);

// Exclusive advisory lock on `<directory>/.dopose.lock` (flock). Released on
// destruction or process exit. Throws Error(kSceneLocked) if already held,
// including by another lock object in the same process.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path &directory);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock &) = delete;
  DirectoryLock &operator=(const DirectoryLock &) = delete;
  DirectoryLock(DirectoryLock &&other) noexcept;
  DirectoryLock &operator=(DirectoryLock &&other) noexcept;

 private:
  int fd_ = -1;
};

}  // namespace dopose
