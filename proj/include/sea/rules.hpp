#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sea/config.hpp"

namespace sea {

enum class LifecycleMode { keep, copy, remove, move };

std::string_view to_string(LifecycleMode mode);

// Mode for a (flushed?, evicted?) pair of list matches.
constexpr LifecycleMode mode_for(bool flush, bool evict) {
  if (flush) return evict ? LifecycleMode::move : LifecycleMode::copy;
  return evict ? LifecycleMode::remove : LifecycleMode::keep;
}

constexpr bool flushes(LifecycleMode m) {
  return m == LifecycleMode::copy || m == LifecycleMode::move;
}
constexpr bool evicts(LifecycleMode m) {
  return m == LifecycleMode::remove || m == LifecycleMode::move;
}

// Shell globs over mountpoint-relative paths, one per line. Blank lines and
// lines starting with '#' are skipped; a leading '/' is ignored. '*' also
// matches across '/', so "*.out" covers every directory.
class PatternList {
 public:
  PatternList() = default;
  explicit PatternList(std::vector<std::string> patterns);

  static PatternList parse(std::string_view text);
  // A missing file is an empty list.
  static PatternList load(const std::filesystem::path& file);

  bool matches(std::string_view relative) const;
  const std::vector<std::string>& patterns() const { return patterns_; }
  bool empty() const { return patterns_.empty(); }

 private:
  std::vector<std::string> patterns_;
};

struct RuleSet {
  PatternList flush;
  PatternList evict;
  PatternList prefetch;

  LifecycleMode classify(std::string_view relative) const {
    return mode_for(flush.matches(relative), evict.matches(relative));
  }
};

RuleSet load_rules(const SeaConfig& cfg);

}  // namespace sea
