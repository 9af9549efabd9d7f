#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sea/config.hpp"

namespace sea {

enum class Intent { read_existing, create_new, metadata };

struct TranslationResult {
  std::string original;
  std::string resolved;
  std::optional<std::size_t> tier;  // nullopt: outside the mountpoint
  Intent intent = Intent::read_existing;

  bool passthrough() const { return !tier.has_value(); }
};

struct TierUsage {
  std::uint64_t free_bytes = 0;
  std::uint64_t reserved_bytes = 0;

  std::uint64_t usable() const {
    return free_bytes > reserved_bytes ? free_bytes - reserved_bytes : 0;
  }
};

struct DirEntry {
  std::string name;
  std::uint64_t ino = 0;
  unsigned char type = 0;  // DT_* value
};

struct TierLocation {
  std::size_t tier;
  std::string path;

  bool operator==(const TierLocation&) const = default;
};

// Name of the per-run bookkeeping directory at the top of the base tier. It
// is hidden from merged listings.
inline constexpr std::string_view kSessionDirName = ".sea_session";

// Lowest tier in `order` whose usable space covers n_processes x
// max_file_size, or the base tier when none does.
std::size_t select_tier(const SeaConfig& cfg, std::span<const TierUsage> usage,
                        std::span<const std::size_t> order);

// Uniform random permutation of equivalent tiers, reproducible per seed.
std::vector<std::size_t> shuffle_equivalent(std::span<const std::size_t> tiers,
                                            std::uint64_t seed);

// Declared tier order with every run of same-class cache tiers shuffled.
std::vector<std::size_t> evaluation_order(const SeaConfig& cfg,
                                          std::uint64_t seed);

// SEA_SEED when set, otherwise pid mixed with the clock.
std::uint64_t process_seed();

// Per-tier free-space cache. Probes are refreshed lazily once older than the
// staleness budget; a refresh drops the reservations taken since the last
// probe because the new figure already reflects what was written.
class UsageCache {
 public:
  UsageCache(std::vector<std::filesystem::path> roots, FreeSpaceFn probe,
             std::chrono::nanoseconds staleness);

  TierUsage usage(std::size_t tier);
  std::vector<TierUsage> snapshot();
  void reserve(std::size_t tier, std::uint64_t bytes);
  void invalidate();

 private:
  struct Slot {
    std::atomic<std::uint64_t> free{0};
    std::atomic<std::uint64_t> reserved{0};
    std::atomic<std::int64_t> probed_at{-1};
  };

  std::vector<std::filesystem::path> roots_;
  FreeSpaceFn probe_;
  std::chrono::nanoseconds staleness_;
  std::unique_ptr<Slot[]> slots_;
};

class PathMap {
 public:
  static constexpr std::chrono::milliseconds kDefaultStaleness{250};

  explicit PathMap(SeaConfig cfg, FreeSpaceFn probe = probe_free_space,
                   std::chrono::nanoseconds staleness = kDefaultStaleness,
                   std::uint64_t seed = process_seed());

  const SeaConfig& config() const { return cfg_; }
  const std::vector<std::size_t>& order() const { return order_; }

  // Mountpoint-relative remainder of an absolute path, if it is inside.
  std::optional<std::string> relative(std::string_view absolute) const;
  // (tier, virtual path) for a concrete path lying inside a tier root.
  std::optional<std::pair<std::size_t, std::string>> reverse(
      std::string_view concrete) const;
  // Absolute, normalized form of path; relative paths are joined to cwd,
  // which is first mapped back to its virtual form when it lies in a tier.
  std::string absolutize(std::string_view path, std::string_view cwd) const;

  std::string concrete(std::size_t tier, std::string_view relative) const;
  std::string virtual_path(std::string_view relative) const;

  TranslationResult translate(std::string_view path, Intent intent);
  // Chooses a tier for a new file and reserves max_file_size on it.
  std::size_t select_tier();
  std::vector<TierLocation> locate_all(std::string_view relative) const;

  // Creates the parent directories of relative on tier, copying modes from
  // the tier where each directory already exists. Returns false when the
  // virtual parent exists nowhere.
  bool ensure_parent(std::size_t tier, std::string_view relative) const;

  // Union of entry names across tiers, fastest first, deduplicated; nullopt
  // when the directory exists on no tier.
  std::optional<std::vector<std::string>> list_directory(
      std::string_view relative) const;
  std::optional<std::vector<DirEntry>> list_entries(std::string_view relative) const;

  UsageCache& usage() { return usage_; }

 private:
  SeaConfig cfg_;
  std::string mount_;
  std::vector<std::string> roots_;
  std::vector<std::size_t> order_;
  UsageCache usage_;
};

}  // namespace sea
