#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "sea/fsutil.hpp"

namespace sea {

enum class FlushState { dirty = 0, flushing = 1, flushed = 2, evicted = 3 };

std::string_view to_string(FlushState s);
std::optional<FlushState> parse_flush_state(std::string_view s);

struct JournalEntry {
  FlushState state = FlushState::dirty;
  std::string sha256;  // of the replica, once flushed
};

// Append-only JSON lines, one per transition, keyed by relative path and
// file version: a rewritten file starts over as a new key. Records are
// written with a single O_APPEND write, which survives a killed process; a
// torn last line after a power loss is skipped on replay and only costs a
// re-copy.
class FlushJournal {
 public:
  explicit FlushJournal(std::filesystem::path file);
  ~FlushJournal();
  FlushJournal(const FlushJournal&) = delete;
  FlushJournal& operator=(const FlushJournal&) = delete;

  // Current state of (relative, version); dirty when never recorded.
  JournalEntry get(const std::string& relative, const FileVersion& v) const;

  // Records a transition. Throws std::logic_error if it would move the key
  // backwards, or reach evicted from anything but flushed without
  // allow_direct_evict.
  void record(const std::string& relative, const FileVersion& v, FlushState state,
              const std::string& sha256 = {}, bool allow_direct_evict = false);

  // Latest state per path, whatever its version.
  std::map<std::string, FlushState> latest() const;

  const std::filesystem::path& file() const { return file_; }
  std::size_t skipped_lines() const { return skipped_; }

 private:
  using Key = std::pair<std::string, FileVersion>;
  struct KeyLess {
    bool operator()(const Key& a, const Key& b) const {
      if (a.first != b.first) return a.first < b.first;
      if (a.second.size != b.second.size) return a.second.size < b.second.size;
      return a.second.mtime_ns < b.second.mtime_ns;
    }
  };

  std::filesystem::path file_;
  int fd_ = -1;
  std::size_t skipped_ = 0;
  mutable std::mutex mu_;
  std::map<Key, JournalEntry, KeyLess> entries_;
  std::map<std::string, FlushState> latest_;
};

}  // namespace sea
