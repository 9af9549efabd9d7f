#include "sea/pathmap.hpp"

#include <dirent.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "sea/paths.hpp"

namespace sea {

namespace {

std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

bool exists_no_follow(const std::string& p) {
  struct stat st {};
  return ::lstat(p.c_str(), &st) == 0;
}

bool is_dir(const std::string& p, mode_t* mode = nullptr) {
  struct stat st {};
  if (::stat(p.c_str(), &st) != 0 || !S_ISDIR(st.st_mode)) return false;
  if (mode) *mode = st.st_mode & 07777;
  return true;
}

}  // namespace

std::size_t select_tier(const SeaConfig& cfg, std::span<const TierUsage> usage,
                        std::span<const std::size_t> order) {
  const auto need = cfg.required_space();
  for (auto idx : order) {
    if (idx == cfg.base_index()) break;
    if (idx < usage.size() && usage[idx].usable() >= need) return idx;
  }
  return cfg.base_index();
}

std::vector<std::size_t> shuffle_equivalent(std::span<const std::size_t> tiers,
                                            std::uint64_t seed) {
  std::vector<std::size_t> out(tiers.begin(), tiers.end());
  if (out.size() < 2) return out;
  std::mt19937_64 rng(seed);
  // Fisher-Yates spelled out so the permutation does not depend on the
  // standard library's std::shuffle.
  for (std::size_t i = out.size() - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(out[i], out[pick(rng)]);
  }
  return out;
}

std::vector<std::size_t> evaluation_order(const SeaConfig& cfg,
                                          std::uint64_t seed) {
  std::vector<std::size_t> order;
  std::size_t i = 0;
  std::uint64_t group = 0;
  while (i < cfg.tiers.size()) {
    std::size_t j = i + 1;
    while (j < cfg.tiers.size() &&
           cfg.tiers[j].tier_class == cfg.tiers[i].tier_class)
      ++j;
    std::vector<std::size_t> run;
    for (std::size_t k = i; k < j; ++k) run.push_back(k);
    if (cfg.tiers[i].tier_class != TierClass::base)
      run = shuffle_equivalent(run, seed + 0x9e3779b97f4a7c15ull * group++);
    order.insert(order.end(), run.begin(), run.end());
    i = j;
  }
  return order;
}

std::uint64_t process_seed() {
  if (const char* s = std::getenv("SEA_SEED"); s && *s)
    return std::strtoull(s, nullptr, 10);
  return (static_cast<std::uint64_t>(::getpid()) << 32) ^
         static_cast<std::uint64_t>(now_ns());
}

UsageCache::UsageCache(std::vector<std::filesystem::path> roots,
                       FreeSpaceFn probe, std::chrono::nanoseconds staleness)
    : roots_(std::move(roots)),
      probe_(std::move(probe)),
      staleness_(staleness),
      slots_(std::make_unique<Slot[]>(roots_.size())) {}

TierUsage UsageCache::usage(std::size_t tier) {
  auto& slot = slots_[tier];
  auto stamp = slot.probed_at.load(std::memory_order_acquire);
  auto now = now_ns();
  if (stamp < 0 || now - stamp > staleness_.count()) {
    auto free = probe_(roots_[tier]);
    if (slot.probed_at.compare_exchange_strong(stamp, now,
                                               std::memory_order_acq_rel)) {
      slot.free.store(free, std::memory_order_release);
      slot.reserved.store(0, std::memory_order_release);
    }
  }
  return TierUsage{slot.free.load(std::memory_order_acquire),
                   slot.reserved.load(std::memory_order_acquire)};
}

std::vector<TierUsage> UsageCache::snapshot() {
  std::vector<TierUsage> out;
  out.reserve(roots_.size());
  for (std::size_t i = 0; i < roots_.size(); ++i) out.push_back(usage(i));
  return out;
}

void UsageCache::reserve(std::size_t tier, std::uint64_t bytes) {
  slots_[tier].reserved.fetch_add(bytes, std::memory_order_acq_rel);
}

void UsageCache::invalidate() {
  for (std::size_t i = 0; i < roots_.size(); ++i)
    slots_[i].probed_at.store(-1, std::memory_order_release);
}

static std::vector<std::filesystem::path> roots_of(const SeaConfig& cfg) {
  std::vector<std::filesystem::path> roots;
  for (const auto& t : cfg.tiers) roots.push_back(t.root);
  return roots;
}

PathMap::PathMap(SeaConfig cfg, FreeSpaceFn probe,
                 std::chrono::nanoseconds staleness, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      mount_(paths::normalize(cfg_.mountpoint.string())),
      order_(evaluation_order(cfg_, seed)),
      usage_(roots_of(cfg_), std::move(probe), staleness) {
  for (const auto& t : cfg_.tiers)
    roots_.push_back(paths::normalize(t.root.string()));
}

std::optional<std::string> PathMap::relative(std::string_view absolute) const {
  return paths::strip_prefix(absolute, mount_);
}

std::optional<std::pair<std::size_t, std::string>> PathMap::reverse(
    std::string_view concrete) const {
  for (std::size_t i = 0; i < roots_.size(); ++i) {
    if (auto rel = paths::strip_prefix(concrete, roots_[i]))
      return std::make_pair(i, virtual_path(*rel));
  }
  return std::nullopt;
}

std::string PathMap::absolutize(std::string_view path,
                                std::string_view cwd) const {
  if (!path.empty() && path.front() == '/') return paths::normalize(path);
  std::string base = paths::normalize(cwd);
  if (auto rev = reverse(base)) base = rev->second;
  return paths::normalize(paths::join(base, path));
}

std::string PathMap::concrete(std::size_t tier,
                              std::string_view relative) const {
  return paths::join(roots_[tier], relative);
}

std::string PathMap::virtual_path(std::string_view relative) const {
  return paths::join(mount_, relative);
}

TranslationResult PathMap::translate(std::string_view path, Intent intent) {
  TranslationResult out;
  out.original = std::string(path);
  out.intent = intent;
  std::string abs;
  if (!path.empty() && path.front() == '/') {
    abs = paths::normalize(path);
  } else {
    char buf[4096];
    if (!::getcwd(buf, sizeof buf)) {
      out.resolved = out.original;
      return out;
    }
    abs = absolutize(path, buf);
  }
  auto rel = relative(abs);
  if (!rel) {
    out.resolved = out.original;
    return out;
  }
  std::size_t tier = cfg_.base_index();
  if (intent == Intent::create_new) {
    tier = select_tier();
  } else {
    for (std::size_t i = 0; i < roots_.size(); ++i) {
      if (exists_no_follow(concrete(i, *rel))) {
        tier = i;
        break;
      }
    }
  }
  out.tier = tier;
  out.resolved = concrete(tier, *rel);
  return out;
}

std::size_t PathMap::select_tier() {
  auto usage = usage_.snapshot();
  auto tier = sea::select_tier(cfg_, usage, order_);
  usage_.reserve(tier, cfg_.max_file_size);
  return tier;
}

std::vector<TierLocation> PathMap::locate_all(std::string_view relative) const {
  std::vector<TierLocation> out;
  for (std::size_t i = 0; i < roots_.size(); ++i) {
    auto p = concrete(i, relative);
    if (exists_no_follow(p)) out.push_back({i, std::move(p)});
  }
  return out;
}

bool PathMap::ensure_parent(std::size_t tier, std::string_view relative) const {
  auto parent = paths::parent(paths::join("/", relative));
  if (parent == "/") return true;
  std::string rel_parent = parent.substr(1);
  if (is_dir(concrete(tier, rel_parent))) return true;

  std::string partial;
  std::size_t pos = 0;
  while (pos <= rel_parent.size()) {
    auto next = rel_parent.find('/', pos);
    if (next == std::string::npos) next = rel_parent.size();
    partial = rel_parent.substr(0, next);
    pos = next + 1;
    auto target = concrete(tier, partial);
    if (is_dir(target)) continue;
    mode_t mode = 0;
    bool found = false;
    for (std::size_t i = 0; i < roots_.size() && !found; ++i)
      found = i != tier && is_dir(concrete(i, partial), &mode);
    if (!found) return false;
    if (::mkdir(target.c_str(), mode) != 0 && errno != EEXIST) return false;
  }
  return true;
}

std::optional<std::vector<DirEntry>> PathMap::list_entries(
    std::string_view relative) const {
  std::vector<DirEntry> entries;
  std::unordered_map<std::string, std::size_t> seen;
  const std::size_t base = roots_.size() - 1;
  bool found = false;
  const bool at_root = paths::strip_prefix("/" + std::string(relative), "/")
                           .value_or("")
                           .empty();
  for (std::size_t i = 0; i < roots_.size(); ++i) {
    auto dir_path = concrete(i, relative);
    DIR* dir = ::opendir(dir_path.c_str());
    if (!dir) continue;
    found = true;
    while (auto* ent = ::readdir(dir)) {
      std::string name = ent->d_name;
      if (at_root && name == kSessionDirName) continue;
      auto [it, fresh] = seen.emplace(name, entries.size());
      if (fresh) {
        entries.push_back({std::move(name), ent->d_ino, ent->d_type});
      } else if (i == base && ent->d_type == DT_DIR &&
                 entries[it->second].type == DT_DIR) {
        // Directories report the identity of their base copy, as stat does.
        entries[it->second].ino = ent->d_ino;
      }
    }
    ::closedir(dir);
  }
  if (!found) return std::nullopt;
  return entries;
}

std::optional<std::vector<std::string>> PathMap::list_directory(
    std::string_view relative) const {
  auto entries = list_entries(relative);
  if (!entries) return std::nullopt;
  std::vector<std::string> names;
  names.reserve(entries->size());
  for (auto& e : *entries) names.push_back(std::move(e.name));
  return names;
}

}  // namespace sea
