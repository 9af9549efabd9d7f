#include "sea/config.hpp"

#include <sys/statvfs.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sea/paths.hpp"

namespace sea {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

// Splits "123.5 MiB" into the number and the unit suffix.
std::pair<double, std::string> split_quantity(std::string_view text) {
  text = trim(text);
  std::size_t i = 0;
  while (i < text.size() &&
         (std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == '.'))
    ++i;
  if (i == 0) throw std::invalid_argument("expected a number");
  double value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + i, value);
  if (ec != std::errc() || ptr != text.data() + i)
    throw std::invalid_argument("malformed number");
  return {value, lower(trim(text.substr(i)))};
}

unsigned parse_count(std::string_view text) {
  text = trim(text);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw std::invalid_argument("expected an integer");
  if (v < 0) return 0;
  return static_cast<unsigned>(v);
}

}  // namespace

std::string_view to_string(TierClass c) {
  switch (c) {
    case TierClass::memory: return "memory";
    case TierClass::local_disk: return "local_disk";
    case TierClass::base: return "base";
  }
  return "?";
}

std::optional<TierClass> parse_tier_class(std::string_view s) {
  auto v = lower(trim(s));
  if (v == "memory" || v == "tmpfs") return TierClass::memory;
  if (v == "local_disk" || v == "disk" || v == "ssd") return TierClass::local_disk;
  if (v == "base" || v == "pfs") return TierClass::base;
  return std::nullopt;
}

ConfigError::ConfigError(Kind kind, const std::string& what, int line,
                         int column)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ":" +
                                        std::to_string(column) + ": " + what
                                  : what),
      kind_(kind),
      line_(line),
      column_(column) {}

std::uint64_t parse_size(std::string_view text) {
  auto [value, unit] = split_quantity(text);
  double scale = 1;
  if (unit.empty() || unit == "b")
    scale = 1;
  else if (unit == "kib" || unit == "k")
    scale = 1024.0;
  else if (unit == "mib" || unit == "m")
    scale = 1024.0 * 1024;
  else if (unit == "gib" || unit == "g")
    scale = 1024.0 * 1024 * 1024;
  else if (unit == "tib" || unit == "t")
    scale = 1024.0 * 1024 * 1024 * 1024;
  else
    throw std::invalid_argument("unknown size unit '" + unit + "'");
  return static_cast<std::uint64_t>(value * scale + 0.5);
}

std::chrono::milliseconds parse_duration(std::string_view text) {
  auto [value, unit] = split_quantity(text);
  double ms = 0;
  if (unit.empty() || unit == "ms")
    ms = value;
  else if (unit == "s")
    ms = value * 1000;
  else if (unit == "min")
    ms = value * 60000;
  else
    throw std::invalid_argument("unknown duration unit '" + unit + "'");
  return std::chrono::milliseconds(static_cast<long long>(ms + 0.5));
}

std::string format_size(std::uint64_t bytes) {
  static constexpr std::pair<std::uint64_t, const char*> units[] = {
      {1ull << 40, "TiB"}, {1ull << 30, "GiB"}, {1ull << 20, "MiB"},
      {1ull << 10, "KiB"}};
  for (auto [scale, name] : units) {
    if (bytes >= scale && bytes % scale == 0)
      return std::to_string(bytes / scale) + name;
  }
  return std::to_string(bytes);
}

SeaConfig load_config(std::string_view source,
                      const std::filesystem::path& config_dir) {
  using Kind = ConfigError::Kind;
  SeaConfig cfg;
  std::optional<std::string> flush, evict, prefetch;
  bool have_mount = false;

  enum class Section { none, sea, tier };
  Section section = Section::none;
  StorageTier* tier = nullptr;
  bool tier_has_class = false;

  auto finish_tier = [&](int line) {
    if (tier && tier->root.empty())
      throw ConfigError(Kind::invalid_value,
                        "tier '" + tier->label + "' has no root", line, 1);
    if (tier && !tier_has_class)
      throw ConfigError(Kind::invalid_value,
                        "tier '" + tier->label + "' has no class", line, 1);
  };

  std::istringstream in{std::string(source)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    std::size_t indent = 0;
    while (indent < line.size() &&
           std::isspace(static_cast<unsigned char>(line[indent])))
      ++indent;
    line = trim(line);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    int col = static_cast<int>(indent) + 1;

    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(Kind::parse, "unterminated section header", lineno,
                          col + static_cast<int>(line.size()));
      auto name = trim(line.substr(1, line.size() - 2));
      finish_tier(lineno);
      tier = nullptr;
      if (name == "sea") {
        section = Section::sea;
      } else if (name.substr(0, 5) == "tier:" && name.size() > 5) {
        section = Section::tier;
        cfg.tiers.push_back(StorageTier{std::string(trim(name.substr(5))), {},
                                        TierClass::local_disk, 0});
        tier = &cfg.tiers.back();
        tier_has_class = false;
      } else {
        throw ConfigError(Kind::parse,
                          "unknown section [" + std::string(name) + "]", lineno,
                          col + 1);
      }
      continue;
    }

    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(Kind::parse, "expected key = value", lineno, col);
    auto key = lower(trim(line.substr(0, eq)));
    auto value = line.substr(eq + 1);
    // Trailing comments need whitespace before the marker.
    for (std::size_t i = 1; i < value.size(); ++i) {
      if ((value[i] == '#' || value[i] == ';') &&
          std::isspace(static_cast<unsigned char>(value[i - 1]))) {
        value = value.substr(0, i);
        break;
      }
    }
    value = trim(value);
    int value_col = col + static_cast<int>(eq) + 1;
    if (section == Section::none)
      throw ConfigError(Kind::parse, "key outside of a section", lineno, col);

    try {
      if (section == Section::sea) {
        if (key == "mount") {
          cfg.mountpoint = std::string(value);
          have_mount = true;
        } else if (key == "max_file_size") {
          cfg.max_file_size = parse_size(value);
        } else if (key == "n_processes") {
          cfg.n_processes = parse_count(value);
        } else if (key == "flushlist") {
          flush = std::string(value);
        } else if (key == "evictlist") {
          evict = std::string(value);
        } else if (key == "prefetchlist") {
          prefetch = std::string(value);
        } else if (key == "flush_interval") {
          cfg.flush_interval = parse_duration(value);
        } else if (key == "flush_workers") {
          cfg.flush_workers = std::max(1u, parse_count(value));
        } else {
          throw ConfigError(Kind::unknown_key, "unknown key '" + key + "'",
                            lineno, col);
        }
      } else {
        if (key == "root") {
          tier->root = std::string(value);
        } else if (key == "class") {
          auto c = parse_tier_class(value);
          if (!c)
            throw ConfigError(Kind::invalid_value,
                              "unknown tier class '" + std::string(value) + "'",
                              lineno, value_col);
          tier->tier_class = *c;
          tier_has_class = true;
        } else if (key == "bandwidth_limit") {
          tier->bandwidth_limit = parse_size(value);
        } else {
          throw ConfigError(Kind::unknown_key, "unknown key '" + key + "'",
                            lineno, col);
        }
      }
    } catch (const std::invalid_argument& e) {
      throw ConfigError(Kind::invalid_value, key + ": " + e.what(), lineno,
                        value_col);
    }
  }
  finish_tier(lineno);

  if (!have_mount) throw ConfigError(Kind::missing_mount, "mount is required");

  auto resolve = [&](const std::optional<std::string>& given,
                     const char* fallback) -> std::filesystem::path {
    std::filesystem::path p = given ? std::filesystem::path(*given)
                                    : std::filesystem::path(fallback);
    if (p.is_relative() && !config_dir.empty()) p = config_dir / p;
    return p;
  };
  cfg.flushlist_path = resolve(flush, ".sea_flushlist");
  cfg.evictlist_path = resolve(evict, ".sea_evictlist");
  cfg.prefetchlist_path = resolve(prefetch, ".sea_prefetchlist");

  validate(cfg);
  cfg.mountpoint = paths::normalize(cfg.mountpoint.string());
  for (auto& t : cfg.tiers) t.root = paths::normalize(t.root.string());
  return cfg;
}

SeaConfig load_config_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in)
    throw ConfigError(ConfigError::Kind::parse,
                      "cannot read " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto dir = std::filesystem::absolute(file).parent_path();
  return load_config(ss.str(), dir);
}

std::filesystem::path default_config_path() {
  if (const char* home = std::getenv("SEA_HOME"); home && *home) return home;
  return "sea.ini";
}

void validate(const SeaConfig& cfg) {
  using Kind = ConfigError::Kind;
  if (cfg.mountpoint.empty())
    throw ConfigError(Kind::missing_mount, "mount is required");
  if (!cfg.mountpoint.is_absolute())
    throw ConfigError(Kind::mount_not_absolute,
                      "mount must be an absolute path");
  if (cfg.tiers.empty())
    throw ConfigError(Kind::base_tier_required, "base tier required");
  auto n_base = std::count_if(cfg.tiers.begin(), cfg.tiers.end(),
                              [](const StorageTier& t) {
                                return t.tier_class == TierClass::base;
                              });
  if (n_base == 0)
    throw ConfigError(Kind::base_tier_required, "base tier required");
  if (n_base > 1)
    throw ConfigError(Kind::multiple_base_tiers,
                      "exactly one base tier allowed");
  if (cfg.tiers.back().tier_class != TierClass::base)
    throw ConfigError(Kind::base_not_last, "base tier must be listed last");
  for (std::size_t i = 1; i < cfg.tiers.size(); ++i) {
    if (cfg.tiers[i].tier_class == TierClass::memory &&
        cfg.tiers[i - 1].tier_class == TierClass::local_disk)
      throw ConfigError(Kind::tier_order, "memory tier '" +
                                              cfg.tiers[i].label +
                                              "' listed after a local disk");
  }
  if (cfg.max_file_size == 0)
    throw ConfigError(Kind::invalid_max_file_size,
                      "max_file_size must be positive");
  if (cfg.n_processes < 1)
    throw ConfigError(Kind::invalid_process_count, "n_processes must be >= 1");

  auto mount = paths::normalize(cfg.mountpoint.string());
  std::vector<std::string> roots;
  for (const auto& t : cfg.tiers) {
    if (!t.root.is_absolute())
      throw ConfigError(Kind::tier_root_not_absolute,
                        "tier '" + t.label + "' root must be absolute");
    auto root = paths::normalize(t.root.string());
    if (paths::has_prefix(root, mount) || paths::has_prefix(mount, root))
      throw ConfigError(Kind::mount_tier_nested,
                        "nested mountpoint/tier: '" + t.label + "'");
    for (const auto& other : roots) {
      if (paths::has_prefix(root, other) || paths::has_prefix(other, root))
        throw ConfigError(Kind::tier_roots_overlap,
                          "tier root " + root + " overlaps " + other);
    }
    roots.push_back(root);
  }
}

std::string to_ini(const SeaConfig& cfg) {
  std::ostringstream out;
  out << "[sea]\n"
      << "mount = " << cfg.mountpoint.string() << "\n"
      << "max_file_size = " << format_size(cfg.max_file_size) << "\n"
      << "n_processes = " << cfg.n_processes << "\n"
      << "flushlist = " << cfg.flushlist_path.string() << "\n"
      << "evictlist = " << cfg.evictlist_path.string() << "\n"
      << "prefetchlist = " << cfg.prefetchlist_path.string() << "\n"
      << "flush_interval = " << cfg.flush_interval.count() << "ms\n"
      << "flush_workers = " << cfg.flush_workers << "\n";
  for (const auto& t : cfg.tiers) {
    out << "\n[tier:" << t.label << "]\n"
        << "root = " << t.root.string() << "\n"
        << "class = " << to_string(t.tier_class) << "\n";
    if (t.bandwidth_limit)
      out << "bandwidth_limit = " << format_size(t.bandwidth_limit) << "\n";
  }
  return out.str();
}

std::uint64_t probe_free_space(const std::filesystem::path& root) {
  struct statvfs st {};
  if (::statvfs(root.c_str(), &st) != 0) return 0;
  return static_cast<std::uint64_t>(st.f_bavail) * st.f_frsize;
}

std::vector<RuntimeWarning> validate_runtime(const SeaConfig& cfg,
                                             const FreeSpaceFn& free_space) {
  std::vector<RuntimeWarning> warnings;
  if (cfg.tiers.size() < 2)
    warnings.push_back({0, "only a base tier is configured; nothing is cached"});
  for (std::size_t i = 0; i < cfg.tiers.size(); ++i) {
    const auto& t = cfg.tiers[i];
    bool is_base = i == cfg.base_index();
    std::error_code ec;
    bool ok = std::filesystem::is_directory(t.root, ec) &&
              ::access(t.root.c_str(), W_OK | X_OK) == 0;
    if (!ok) {
      std::string msg = "tier '" + t.label + "' root " + t.root.string() +
                        " is missing or not writable";
      if (is_base) throw std::runtime_error(msg);
      warnings.push_back({i, msg});
      continue;
    }
    if (is_base) continue;
    auto avail = free_space(t.root);
    if (avail < cfg.required_space()) {
      warnings.push_back(
          {i, "tier '" + t.label + "' has " + std::to_string(avail) +
                  " bytes free, below n_processes x max_file_size = " +
                  std::to_string(cfg.required_space())});
    }
  }
  return warnings;
}

}  // namespace sea
