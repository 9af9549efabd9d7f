#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace sea {

class Throttle;

struct FileVersion {
  std::uint64_t size = 0;
  std::int64_t mtime_ns = 0;

  bool operator==(const FileVersion&) const = default;
};

// lstat-based; nullopt when the path is missing or not a regular file.
std::optional<FileVersion> regular_file_version(const std::string& path);

std::string sha256_file(const std::string& path, Throttle* throttle = nullptr);

std::string sha256_hex(const void* data, std::size_t size);

struct CopyResult {
  std::uint64_t bytes = 0;
  std::string sha256;
};

// Copies src to dst through a temporary sibling of dst: data, mode and mtime
// are written and synced before the rename, so dst is either the old file or
// the complete new one. Throws std::system_error.
CopyResult replicate_file(const std::string& src, const std::string& dst,
                          Throttle* read_throttle = nullptr,
                          Throttle* write_throttle = nullptr);

// Name of the temporary used by replicate_file for dst.
std::string replica_temp_name(const std::string& dst);

struct WalkEntry {
  std::string relative;
  std::string path;
};

// Regular files below root, relative to it. Directories named in skip_top
// are skipped at the top level only. Unreadable subtrees are ignored.
std::vector<WalkEntry> walk_files(const std::filesystem::path& root,
                                  const std::set<std::string>& skip_top = {});

// Paths that some process currently holds open for writing.
std::set<std::string> open_write_handles();
using WriterProbe = std::function<std::set<std::string>()>;

}  // namespace sea
