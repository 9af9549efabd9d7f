#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sea {

enum class TierClass { memory, local_disk, base };

std::string_view to_string(TierClass c);
std::optional<TierClass> parse_tier_class(std::string_view s);

struct StorageTier {
  std::string label;
  std::filesystem::path root;
  TierClass tier_class = TierClass::local_disk;
  // Emulated bandwidth cap in bytes/s for desk-scale runs; 0 means unlimited.
  std::uint64_t bandwidth_limit = 0;

  bool operator==(const StorageTier&) const = default;
};

struct SeaConfig {
  std::filesystem::path mountpoint;
  std::vector<StorageTier> tiers;  // fastest first, base last
  std::uint64_t max_file_size = 0;
  unsigned n_processes = 1;
  std::filesystem::path flushlist_path;
  std::filesystem::path evictlist_path;
  std::filesystem::path prefetchlist_path;
  std::chrono::milliseconds flush_interval{1000};
  unsigned flush_workers = 1;

  const StorageTier& base() const { return tiers.back(); }
  std::size_t base_index() const { return tiers.size() - 1; }
  // Space that must be free on a tier before new files are placed there.
  std::uint64_t required_space() const { return max_file_size * n_processes; }

  bool operator==(const SeaConfig&) const = default;
};

class ConfigError : public std::runtime_error {
 public:
  enum class Kind {
    parse,
    unknown_key,
    missing_mount,
    mount_not_absolute,
    base_tier_required,
    multiple_base_tiers,
    base_not_last,
    tier_order,
    tier_root_not_absolute,
    tier_roots_overlap,
    mount_tier_nested,
    invalid_max_file_size,
    invalid_process_count,
    invalid_value,
  };

  ConfigError(Kind kind, const std::string& what, int line = 0, int column = 0);

  Kind kind() const noexcept { return kind_; }
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  Kind kind_;
  int line_;
  int column_;
};

// Sizes accept plain byte counts or binary suffixes (KiB, MiB, GiB, TiB).
std::uint64_t parse_size(std::string_view text);
// Durations accept ms, s, or min suffixes; a bare number is milliseconds.
std::chrono::milliseconds parse_duration(std::string_view text);
std::string format_size(std::uint64_t bytes);

// Parses INI text. Relative rule-list paths resolve against config_dir, and
// unset rule lists default to .sea_flushlist etc. inside config_dir.
SeaConfig load_config(std::string_view source,
                      const std::filesystem::path& config_dir = {});
SeaConfig load_config_file(const std::filesystem::path& file);

// Path named by SEA_HOME, or ./sea.ini.
std::filesystem::path default_config_path();

void validate(const SeaConfig& cfg);

std::string to_ini(const SeaConfig& cfg);

// Bytes available to unprivileged writers under root (statvfs f_bavail), or 0
// when the filesystem cannot be queried.
std::uint64_t probe_free_space(const std::filesystem::path& root);
using FreeSpaceFn = std::function<std::uint64_t(const std::filesystem::path&)>;

struct RuntimeWarning {
  std::size_t tier;
  std::string message;
};

// Probes tier roots. Non-base problems become warnings; a base tier that is
// missing or unwritable throws std::runtime_error.
std::vector<RuntimeWarning> validate_runtime(
    const SeaConfig& cfg, const FreeSpaceFn& free_space = probe_free_space);

}  // namespace sea
