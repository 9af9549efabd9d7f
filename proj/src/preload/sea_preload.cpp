// Preloaded shim: wraps the path-taking file API of glibc and rewrites paths
// under the virtual mountpoint to a concrete tier before calling the next
// definition. Descriptor-based calls are left alone.

#ifndef _GNU_SOURCE
#define _GNU_SOURCE
#endif

#include <dirent.h>
#include <dlfcn.h>
#include <fcntl.h>
#include <limits.h>
#include <stdarg.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <sys/stat.h>
#include <sys/statfs.h>
#include <sys/statvfs.h>
#include <sys/time.h>
#include <sys/xattr.h>
#include <unistd.h>
#include <utime.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sea/config.hpp"
#include "sea/diag.hpp"
#include "sea/pathmap.hpp"
#include "sea/paths.hpp"

#define SEA_EXPORT extern "C" __attribute__((visibility("default")))

// Entry points that current headers no longer declare.
extern "C" {
int __open_2(const char*, int);
int __open64_2(const char*, int);
int __openat_2(int, const char*, int);
int __openat64_2(int, const char*, int);
int __xstat(int, const char*, struct stat*);
int __xstat64(int, const char*, struct stat64*);
int __lxstat(int, const char*, struct stat*);
int __lxstat64(int, const char*, struct stat64*);
int __fxstatat(int, int, const char*, struct stat*, int);
int __fxstatat64(int, int, const char*, struct stat64*, int);
}

namespace {

using sea::PathMap;

__attribute__((tls_model("initial-exec"))) thread_local bool t_inside = false;

// Marks the thread as inside Sea; nested wrapper calls pass straight through.
class Guard {
 public:
  Guard() : owner_(!t_inside) { t_inside = true; }
  ~Guard() {
    if (owner_) t_inside = false;
  }
  Guard(const Guard&) = delete;
  Guard& operator=(const Guard&) = delete;
  bool owner() const { return owner_; }

 private:
  bool owner_;
};

template <class Fn>
Fn next_symbol(const char* name) {
  return reinterpret_cast<Fn>(::dlsym(RTLD_NEXT, name));
}

#define SEA_NEXT(fn) \
  static const auto real = next_symbol<decltype(&fn)>(#fn)

// Pinned version for symbols whose oldest version behaves differently.
#define SEA_NEXT_V(fn, version)                                                     \
  static const auto real = [] {                                                     \
    auto f = reinterpret_cast<decltype(&fn)>(::dlvsym(RTLD_NEXT, #fn, version));    \
    return f ? f : next_symbol<decltype(&fn)>(#fn);                                 \
  }()

#define SEA_NEXT_OR(fn, fail)  \
  SEA_NEXT(fn);                \
  if (!real) {                 \
    errno = ENOSYS;            \
    return fail;               \
  }

std::once_flag g_once;
PathMap* g_map = nullptr;  // leaked on purpose: wrappers run during exit

PathMap* pathmap() {
  std::call_once(g_once, [] {
    try {
      auto cfg = sea::load_config_file(sea::default_config_path());
      g_map = new PathMap(std::move(cfg));
      sea::diag::debug(1, "mount " + g_map->config().mountpoint.string());
    } catch (const std::exception& e) {
      sea::diag::warn(std::string("configuration unavailable, passing through: ") +
                      e.what());
    }
  });
  return g_map;
}

// Per-call context: owns the recursion guard and remembers errno so the
// translation work never leaks into what the application sees.
struct Call {
  Guard guard;
  int saved_errno = errno;
  PathMap* pm = nullptr;

  Call() {
    if (guard.owner()) pm = pathmap();
    errno = saved_errno;
  }
  bool active() const { return pm != nullptr; }
  void restore() const { errno = saved_errno; }
};

std::optional<std::string> fd_path(int fd) {
  char link[PATH_MAX];
  std::string proc = "/proc/self/fd/" + std::to_string(fd);
  ssize_t n = ::readlink(proc.c_str(), link, sizeof link - 1);
  if (n <= 0 || link[0] != '/') return std::nullopt;
  return std::string(link, std::size_t(n));
}

// Mountpoint-relative form of (dirfd, path), or nullopt when it lies outside.
// A path that names the mountpoint lexically but resolves outside it (say
// "<mount>/..") cannot be handed to the kernel as written, because the
// mountpoint does not exist; *outside then receives the absolute form.
std::optional<std::string> locate(PathMap& pm, int dirfd, const char* path,
                                  std::string* outside = nullptr) {
  if (!path || !*path) return std::nullopt;
  std::string abs;
  bool virtual_base = false;
  if (path[0] == '/') {
    abs = sea::paths::normalize(path);
    const auto& mount = pm.config().mountpoint.native();
    std::string_view raw(path);
    virtual_base = raw.starts_with(mount) &&
                   (raw.size() == mount.size() || raw[mount.size()] == '/');
  } else {
    std::string base;
    if (dirfd == AT_FDCWD) {
      char buf[PATH_MAX];
      if (!::getcwd(buf, sizeof buf)) return std::nullopt;
      base = buf;
    } else {
      auto p = fd_path(dirfd);
      if (!p) return std::nullopt;
      base = std::move(*p);
    }
    virtual_base = pm.reverse(base).has_value();
    abs = pm.absolutize(path, base);
  }
  auto rel = pm.relative(abs);
  if (!rel && virtual_base && outside) *outside = std::move(abs);
  return rel;
}

bool lexists(const std::string& p) {
  struct stat st;
  return ::lstat(p.c_str(), &st) == 0;
}

std::optional<std::size_t> first_tier(PathMap& pm, const std::string& rel) {
  const auto n = pm.config().tiers.size();
  for (std::size_t i = 0; i < n; ++i)
    if (lexists(pm.concrete(i, rel))) return i;
  return std::nullopt;
}

bool is_dir_no_follow(const std::string& p) {
  struct stat st;
  return ::lstat(p.c_str(), &st) == 0 && S_ISDIR(st.st_mode);
}

// First copy in tier order. Directories resolve to their base copy when there
// is one, so their identity does not change as children land on other tiers.
std::string existing_path(PathMap& pm, const std::string& rel) {
  const auto base = pm.config().base_index();
  auto tier = first_tier(pm, rel);
  if (!tier) return pm.concrete(base, rel);
  auto path = pm.concrete(*tier, rel);
  if (*tier != base && is_dir_no_follow(path)) {
    auto on_base = pm.concrete(base, rel);
    if (is_dir_no_follow(on_base)) return on_base;
  }
  return path;
}

// Existing copy if there is one, else a fresh placement with its parent
// directories created on demand.
std::string create_path(PathMap& pm, const std::string& rel) {
  if (auto tier = first_tier(pm, rel)) return pm.concrete(*tier, rel);
  const auto base = pm.config().base_index();
  auto tier = pm.select_tier();
  if (!pm.ensure_parent(tier, rel)) tier = base;
  if (sea::diag::level() >= 1)
    sea::diag::debug(1, "place " + rel + " on " + pm.config().tiers[tier].label);
  return pm.concrete(tier, rel);
}

// Follows symlinks at the end of a virtual path through the merged view, so
// a relative target resolves against the union rather than the tier holding
// the link. Targets leaving the mountpoint come back in outside.
std::optional<std::string> chase(PathMap& pm, std::string rel, std::string& outside) {
  for (int hops = 0; hops < 40; ++hops) {
    auto tier = first_tier(pm, rel);
    if (!tier) return rel;
    auto path = pm.concrete(*tier, rel);
    struct stat st;
    if (::lstat(path.c_str(), &st) != 0 || !S_ISLNK(st.st_mode)) return rel;
    char buf[PATH_MAX];
    ssize_t n = ::readlink(path.c_str(), buf, sizeof buf);
    if (n <= 0) return rel;
    std::string target(buf, std::size_t(n));
    std::string abs = target.front() == '/'
                          ? sea::paths::normalize(target)
                          : pm.absolutize(target, sea::paths::parent(pm.virtual_path(rel)));
    auto next = pm.relative(abs);
    if (!next) {
      outside = std::move(abs);
      return std::nullopt;
    }
    rel = std::move(*next);
  }
  return rel;
}

void trace(const char* fn, const char* path, const std::string& resolved) {
  if (sea::diag::level() >= 2)
    sea::diag::debug(2, std::string(fn) + " " + path + " -> " + resolved);
}

// existing and create follow a trailing symlink; entry and create_entry
// act on the name itself.
enum class Want { existing, entry, create, create_entry };

bool follows(Want w) { return w == Want::existing || w == Want::create; }

// Concrete target for rel, or nullopt with outside set when a followed
// symlink leaves the mountpoint.
std::optional<std::string> resolve(PathMap& pm, std::string rel, Want want,
                                   std::string& outside) {
  if (follows(want)) {
    auto chased = chase(pm, std::move(rel), outside);
    if (!chased) return std::nullopt;
    rel = std::move(*chased);
  }
  if (want == Want::create || want == Want::create_entry) return create_path(pm, rel);
  return existing_path(pm, rel);
}

// Runs op(path, dirfd) on the concrete location of (dirfd, path), or on the
// original arguments when the path is outside the mountpoint.
template <class Op>
auto with_path(const char* fn, int dirfd, const char* path, Want want, Op op) {
  Call c;
  if (!c.active()) return op(path, dirfd);
  std::string target;
  try {
    std::string outside;
    auto rel = locate(*c.pm, dirfd, path, &outside);
    if (!rel) {
      c.restore();
      return outside.empty() ? op(path, dirfd) : op(outside.c_str(), AT_FDCWD);
    }
    auto resolved = resolve(*c.pm, *rel, want, outside);
    if (!resolved) {
      c.restore();
      return op(outside.c_str(), AT_FDCWD);
    }
    target = std::move(*resolved);
  } catch (...) {
    c.restore();
    return op(path, dirfd);
  }
  trace(fn, path, target);
  c.restore();
  return op(target.c_str(), AT_FDCWD);
}

// Applies op to every copy; the first result is returned. Metadata changes
// and removals must reach directories that exist on several tiers.
template <class Op>
int with_all(const char* fn, int dirfd, const char* path, bool follow, Op op) {
  Call c;
  if (!c.active()) return op(path, dirfd);
  std::vector<sea::TierLocation> locs;
  std::string base_path;
  try {
    std::string outside;
    auto rel = locate(*c.pm, dirfd, path, &outside);
    if (!rel) {
      c.restore();
      return outside.empty() ? op(path, dirfd) : op(outside.c_str(), AT_FDCWD);
    }
    if (follow) {
      rel = chase(*c.pm, *rel, outside);
      if (!rel) {
        c.restore();
        return op(outside.c_str(), AT_FDCWD);
      }
    }
    locs = c.pm->locate_all(*rel);
    base_path = c.pm->concrete(c.pm->config().base_index(), *rel);
  } catch (...) {
    c.restore();
    return op(path, dirfd);
  }
  c.restore();
  if (locs.empty()) return op(base_path.c_str(), AT_FDCWD);
  int result = 0, err = 0;
  for (std::size_t i = 0; i < locs.size(); ++i) {
    trace(fn, path, locs[i].path);
    int r = op(locs[i].path.c_str(), AT_FDCWD);
    if (i == 0 || (result == 0 && r != 0)) {
      if (r != 0) err = errno;
      result = r;
    }
  }
  if (result != 0) errno = err;
  return result;
}

Want fopen_want(const char* mode) {
  if (!mode || mode[0] == 'r') return Want::existing;
  return std::strchr(mode, 'x') ? Want::create_entry : Want::create;
}

// rmdir over the merged view: only an empty union may be removed.
int remove_dir(const char* fn, int dirfd, const char* path,
               int (*real_rmdir)(const char*)) {
  Call c;
  std::string outside;
  auto passthrough = [&]() -> int {
    if (!outside.empty()) return real_rmdir(outside.c_str());
    if (dirfd == AT_FDCWD || (path && path[0] == '/')) return real_rmdir(path);
    SEA_NEXT(unlinkat);
    return real(dirfd, path, AT_REMOVEDIR);
  };
  if (!c.active()) return passthrough();
  std::optional<std::string> rel;
  std::vector<sea::TierLocation> locs;
  std::optional<std::vector<sea::DirEntry>> entries;
  try {
    rel = locate(*c.pm, dirfd, path, &outside);
    if (rel) {
      locs = c.pm->locate_all(*rel);
      entries = c.pm->list_entries(*rel);
    }
  } catch (...) {
    rel.reset();
  }
  c.restore();
  if (!rel) return passthrough();
  if (locs.empty()) return real_rmdir(c.pm->concrete(c.pm->config().base_index(), *rel).c_str());
  if (entries) {
    for (const auto& e : *entries) {
      if (e.name != "." && e.name != "..") {
        errno = ENOTEMPTY;
        return -1;
      }
    }
  }
  int result = 0, err = 0;
  for (const auto& l : locs) {
    trace(fn, path, l.path);
    if (real_rmdir(l.path.c_str()) != 0 && result == 0) {
      result = -1;
      err = errno;
    }
  }
  if (result != 0) errno = err;
  return result;
}

// Copies a file or symlink to dst through a temporary, then unlinks src.
int copy_then_unlink(const std::string& src, const std::string& dst) {
  struct stat st;
  if (::lstat(src.c_str(), &st) != 0) return -1;
  auto slash = dst.rfind('/');
  std::string tmp = dst.substr(0, slash + 1) + ".sea_rename." + std::to_string(::getpid()) +
                    "." + dst.substr(slash + 1);
  if (S_ISLNK(st.st_mode)) {
    std::vector<char> target(std::size_t(st.st_size) + 1);
    ssize_t n = ::readlink(src.c_str(), target.data(), target.size());
    if (n < 0) return -1;
    target[std::size_t(n)] = '\0';
    if (::symlink(target.data(), tmp.c_str()) != 0) return -1;
  } else if (S_ISREG(st.st_mode)) {
    int in = ::open(src.c_str(), O_RDONLY | O_CLOEXEC);
    if (in < 0) return -1;
    int out = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0600);
    if (out < 0) {
      int e = errno;
      ::close(in);
      errno = e;
      return -1;
    }
    char buf[1 << 16];
    bool ok = true;
    for (;;) {
      ssize_t n = ::read(in, buf, sizeof buf);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        ok = n == 0;
        break;
      }
      for (ssize_t off = 0; off < n;) {
        ssize_t w = ::write(out, buf + off, std::size_t(n - off));
        if (w < 0 && errno == EINTR) continue;
        if (w < 0) {
          ok = false;
          break;
        }
        off += w;
      }
      if (!ok) break;
    }
    struct timespec times[2] = {st.st_atim, st.st_mtim};
    if (ok) ok = ::fchmod(out, st.st_mode & 07777) == 0 && ::futimens(out, times) == 0;
    int e = errno;
    ::close(in);
    if (::close(out) != 0) ok = false;
    if (!ok) {
      ::unlink(tmp.c_str());
      errno = e;
      return -1;
    }
  } else {
    errno = EXDEV;
    return -1;
  }
  if (::rename(tmp.c_str(), dst.c_str()) != 0) {
    int e = errno;
    ::unlink(tmp.c_str());
    errno = e;
    return -1;
  }
  return ::unlink(src.c_str());
}

void unlink_stale(const std::vector<sea::TierLocation>& locs, std::size_t keep_tier) {
  for (const auto& l : locs)
    if (l.tier != keep_tier && !is_dir_no_follow(l.path)) ::unlink(l.path.c_str());
}

#ifndef RENAME_NOREPLACE
#define RENAME_NOREPLACE (1 << 0)
#endif
#ifndef RENAME_EXCHANGE
#define RENAME_EXCHANGE (1 << 1)
#endif

using RealRename = int (*)(int, const char*, int, const char*, unsigned);

int do_rename(int olddirfd, const char* oldpath, int newdirfd, const char* newpath,
              unsigned flags, RealRename real) {
  Call c;
  if (!c.active()) return real(olddirfd, oldpath, newdirfd, newpath, flags);
  PathMap& pm = *c.pm;
  std::optional<std::string> src, dst;
  std::string src_outside, dst_outside;
  try {
    src = locate(pm, olddirfd, oldpath, &src_outside);
    dst = locate(pm, newdirfd, newpath, &dst_outside);
  } catch (...) {
    src.reset();
    dst.reset();
  }
  if (!src_outside.empty()) oldpath = src_outside.c_str(), olddirfd = AT_FDCWD;
  if (!dst_outside.empty()) newpath = dst_outside.c_str(), newdirfd = AT_FDCWD;
  c.restore();
  if (!src && !dst) return real(olddirfd, oldpath, newdirfd, newpath, flags);

  const std::size_t base = pm.config().base_index();
  std::vector<sea::TierLocation> src_locs, dst_locs;
  if (src) src_locs = pm.locate_all(*src);
  if (dst) dst_locs = pm.locate_all(*dst);

  if (!dst) {
    // Leaving the mountpoint: the real call decides, stale copies go.
    std::string from = src_locs.empty() ? pm.concrete(base, *src) : src_locs.front().path;
    c.restore();
    int r = real(AT_FDCWD, from.c_str(), newdirfd, newpath, flags);
    if (r == 0 && !src_locs.empty()) unlink_stale(src_locs, src_locs.front().tier);
    return r;
  }
  if ((flags & RENAME_NOREPLACE) && !dst_locs.empty()) {
    errno = EEXIST;
    return -1;
  }
  if (!src) {
    std::size_t tier = dst_locs.empty() ? pm.select_tier() : dst_locs.front().tier;
    if (!pm.ensure_parent(tier, *dst)) tier = base;
    c.restore();
    int r = real(olddirfd, oldpath, AT_FDCWD, pm.concrete(tier, *dst).c_str(), flags);
    if (r == 0) unlink_stale(dst_locs, tier);
    return r;
  }
  if (src_locs.empty()) {
    c.restore();
    return real(AT_FDCWD, pm.concrete(base, *src).c_str(), AT_FDCWD,
                pm.concrete(base, *dst).c_str(), flags);
  }

  if (is_dir_no_follow(src_locs.front().path)) {
    int result = 0, err = 0;
    for (const auto& l : src_locs) {
      if (!is_dir_no_follow(l.path)) continue;
      pm.ensure_parent(l.tier, *dst);
      auto to = pm.concrete(l.tier, *dst);
      trace("rename", oldpath, l.path + " => " + to);
      if (real(AT_FDCWD, l.path.c_str(), AT_FDCWD, to.c_str(), flags) != 0 && result == 0) {
        result = -1;
        err = errno;
      }
    }
    if (result != 0) errno = err;
    return result;
  }

  const auto& from = src_locs.front();
  if (flags & RENAME_EXCHANGE) {
    if (dst_locs.empty() || dst_locs.front().tier != from.tier) {
      errno = dst_locs.empty() ? ENOENT : EXDEV;
      return -1;
    }
    return real(AT_FDCWD, from.path.c_str(), AT_FDCWD, dst_locs.front().path.c_str(), flags);
  }

  std::size_t tier = pm.select_tier();
  if (!pm.ensure_parent(tier, *dst)) {
    c.restore();
    return real(AT_FDCWD, from.path.c_str(), AT_FDCWD, pm.concrete(base, *dst).c_str(), flags);
  }
  auto to = pm.concrete(tier, *dst);
  trace("rename", oldpath, from.path + " => " + to);
  c.restore();
  int r = tier == from.tier ? real(AT_FDCWD, from.path.c_str(), AT_FDCWD, to.c_str(), flags)
                            : copy_then_unlink(from.path, to);
  if (r != 0) return r;
  int e = errno;
  unlink_stale(dst_locs, tier);
  unlink_stale(src_locs, from.tier);
  errno = e;
  return 0;
}

int do_link(int olddirfd, const char* oldpath, int newdirfd, const char* newpath, int flags) {
  SEA_NEXT(linkat);
  Call c;
  if (!c.active()) return real(olddirfd, oldpath, newdirfd, newpath, flags);
  PathMap& pm = *c.pm;
  std::optional<std::string> src, dst;
  std::string src_outside, dst_outside;
  try {
    src = locate(pm, olddirfd, oldpath, &src_outside);
    dst = locate(pm, newdirfd, newpath, &dst_outside);
  } catch (...) {
    src.reset();
    dst.reset();
  }
  if (!src_outside.empty()) oldpath = src_outside.c_str(), olddirfd = AT_FDCWD;
  if (!dst_outside.empty()) newpath = dst_outside.c_str(), newdirfd = AT_FDCWD;
  c.restore();
  if (!src && !dst) return real(olddirfd, oldpath, newdirfd, newpath, flags);
  std::string from = oldpath;
  int from_fd = olddirfd;
  std::size_t tier = pm.config().base_index();
  if (src) {
    auto t = first_tier(pm, *src);
    if (t) tier = *t;
    from = pm.concrete(tier, *src);
    from_fd = AT_FDCWD;
  }
  if (!dst) return real(from_fd, from.c_str(), newdirfd, newpath, flags);
  if (first_tier(pm, *dst)) {
    errno = EEXIST;
    return -1;
  }
  // A hard link has to live on the file system of its source.
  if (!pm.ensure_parent(tier, *dst)) tier = pm.config().base_index();
  auto to = pm.concrete(tier, *dst);
  trace("link", newpath, to);
  c.restore();
  return real(from_fd, from.c_str(), AT_FDCWD, to.c_str(), flags);
}

// Merged directory streams, keyed by the DIR* handed to the application.
struct DirStream {
  std::vector<sea::DirEntry> entries;
  std::size_t pos = 0;
  struct dirent ent;
  struct dirent64 ent64;
};

std::mutex& dirs_mutex() {
  static auto* mu = new std::mutex;
  return *mu;
}
std::unordered_map<DIR*, DirStream*>& dirs() {
  static auto* table = new std::unordered_map<DIR*, DirStream*>;
  return *table;
}

void register_stream(DIR* d, std::vector<sea::DirEntry> entries) {
  auto* s = new DirStream;
  s->entries = std::move(entries);
  std::lock_guard lock(dirs_mutex());
  auto& slot = dirs()[d];
  delete slot;
  slot = s;
}

DirStream* find_stream(DIR* d) {
  std::lock_guard lock(dirs_mutex());
  auto it = dirs().find(d);
  return it == dirs().end() ? nullptr : it->second;
}

template <class Dirent>
void fill(Dirent& out, const sea::DirEntry& e, std::size_t index) {
  std::memset(&out, 0, sizeof out);
  out.d_ino = e.ino;
  out.d_off = decltype(out.d_off)(index + 1);
  out.d_reclen = sizeof out;
  out.d_type = e.type;
  std::strncpy(out.d_name, e.name.c_str(), sizeof out.d_name - 1);
}

std::optional<std::vector<sea::DirEntry>> merged_entries(int dirfd, const char* path) {
  Call c;
  if (!c.active()) return std::nullopt;
  try {
    std::string outside;
    auto rel = locate(*c.pm, dirfd, path);
    if (rel) rel = chase(*c.pm, *rel, outside);
    if (!rel) {
      c.restore();
      return std::nullopt;
    }
    auto entries = c.pm->list_entries(*rel);
    c.restore();
    return entries;
  } catch (...) {
    c.restore();
    return std::nullopt;
  }
}

template <class Dirent>
int scan(const char* dir, Dirent*** namelist, int (*selector)(const Dirent*),
         int (*cmp)(const Dirent**, const Dirent**), std::vector<sea::DirEntry>& entries) {
  std::vector<Dirent*> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto* d = static_cast<Dirent*>(std::malloc(sizeof(Dirent)));
    if (!d) {
      for (auto* p : out) std::free(p);
      errno = ENOMEM;
      return -1;
    }
    fill(*d, entries[i], i);
    if (selector && !selector(d)) {
      std::free(d);
      continue;
    }
    out.push_back(d);
  }
  auto** list = static_cast<Dirent**>(std::malloc(sizeof(Dirent*) * (out.size() + 1)));
  if (!list) {
    for (auto* p : out) std::free(p);
    errno = ENOMEM;
    return -1;
  }
  std::copy(out.begin(), out.end(), list);
  if (cmp)
    std::qsort(list, out.size(), sizeof(Dirent*),
               reinterpret_cast<int (*)(const void*, const void*)>(cmp));
  *namelist = list;
  (void)dir;
  return int(out.size());
}

// mkstemp-style calls: the X's are filled in on the concrete path and copied
// back into the caller's template.
template <class Op>
auto with_template(char* templ, int suffixlen, bool directory, Op op) {
  Call c;
  if (!c.active()) return op(templ);
  std::string concrete;
  try {
    auto rel = locate(*c.pm, AT_FDCWD, templ);
    if (!rel) {
      c.restore();
      return op(templ);
    }
    auto& pm = *c.pm;
    std::size_t tier = directory ? pm.config().base_index() : pm.select_tier();
    if (!pm.ensure_parent(tier, *rel)) tier = pm.config().base_index();
    concrete = pm.concrete(tier, *rel);
  } catch (...) {
    c.restore();
    return op(templ);
  }
  const std::size_t tail = 6 + std::size_t(std::max(suffixlen, 0));
  const std::size_t n = std::strlen(templ);
  if (n < tail || concrete.size() < tail) {
    c.restore();
    return op(templ);
  }
  c.restore();
  auto r = op(concrete.data());
  std::memcpy(templ + n - tail, concrete.data() + concrete.size() - tail, tail);
  trace("mkstemp", templ, concrete);
  return r;
}

// Maps a concrete path inside a tier back to its virtual form, in place.
bool virtualize(std::string& path) {
  if (!g_map) return false;
  auto rev = g_map->reverse(sea::paths::normalize(path));
  if (!rev) return false;
  path = rev->second;
  return true;
}

}  // namespace

// ---- open ------------------------------------------------------------------

namespace {

mode_t mode_arg(int flags, va_list ap) {
  if ((flags & O_CREAT) || (flags & O_TMPFILE) == O_TMPFILE) return mode_t(va_arg(ap, int));
  return 0;
}

Want open_want(int flags) {
  if ((flags & O_CREAT) && (flags & O_TMPFILE) != O_TMPFILE)
    return (flags & O_EXCL) ? Want::create_entry : Want::create;
  return (flags & O_NOFOLLOW) ? Want::entry : Want::existing;
}

Want nofollow(int flags) { return (flags & AT_SYMLINK_NOFOLLOW) ? Want::entry : Want::existing; }

}  // namespace

SEA_EXPORT int open(const char* path, int flags, ...) {
  va_list ap;
  va_start(ap, flags);
  mode_t mode = mode_arg(flags, ap);
  va_end(ap);
  SEA_NEXT(open);
  return with_path("open", AT_FDCWD, path, open_want(flags),
                   [&](const char* p, int) { return real(p, flags, mode); });
}

SEA_EXPORT int open64(const char* path, int flags, ...) {
  va_list ap;
  va_start(ap, flags);
  mode_t mode = mode_arg(flags, ap);
  va_end(ap);
  SEA_NEXT(open64);
  return with_path("open64", AT_FDCWD, path, open_want(flags),
                   [&](const char* p, int) { return real(p, flags, mode); });
}

SEA_EXPORT int openat(int dirfd, const char* path, int flags, ...) {
  va_list ap;
  va_start(ap, flags);
  mode_t mode = mode_arg(flags, ap);
  va_end(ap);
  SEA_NEXT(openat);
  return with_path("openat", dirfd, path, open_want(flags),
                   [&](const char* p, int fd) { return real(fd, p, flags, mode); });
}

SEA_EXPORT int openat64(int dirfd, const char* path, int flags, ...) {
  va_list ap;
  va_start(ap, flags);
  mode_t mode = mode_arg(flags, ap);
  va_end(ap);
  SEA_NEXT(openat64);
  return with_path("openat64", dirfd, path, open_want(flags),
                   [&](const char* p, int fd) { return real(fd, p, flags, mode); });
}

SEA_EXPORT int __open_2(const char* path, int flags) {
  SEA_NEXT(__open_2);
  return with_path("__open_2", AT_FDCWD, path, open_want(flags),
                   [&](const char* p, int) { return real(p, flags); });
}

SEA_EXPORT int __open64_2(const char* path, int flags) {
  SEA_NEXT(__open64_2);
  return with_path("__open64_2", AT_FDCWD, path, open_want(flags),
                   [&](const char* p, int) { return real(p, flags); });
}

SEA_EXPORT int __openat_2(int dirfd, const char* path, int flags) {
  SEA_NEXT(__openat_2);
  return with_path("__openat_2", dirfd, path, open_want(flags),
                   [&](const char* p, int fd) { return real(fd, p, flags); });
}

SEA_EXPORT int __openat64_2(int dirfd, const char* path, int flags) {
  SEA_NEXT(__openat64_2);
  return with_path("__openat64_2", dirfd, path, open_want(flags),
                   [&](const char* p, int fd) { return real(fd, p, flags); });
}

SEA_EXPORT int creat(const char* path, mode_t mode) {
  SEA_NEXT(creat);
  return with_path("creat", AT_FDCWD, path, Want::create,
                   [&](const char* p, int) { return real(p, mode); });
}

SEA_EXPORT int creat64(const char* path, mode_t mode) {
  SEA_NEXT(creat64);
  return with_path("creat64", AT_FDCWD, path, Want::create,
                   [&](const char* p, int) { return real(p, mode); });
}

SEA_EXPORT FILE* fopen(const char* path, const char* mode) {
  SEA_NEXT(fopen);
  return with_path("fopen", AT_FDCWD, path,
                   fopen_want(mode),
                   [&](const char* p, int) { return real(p, mode); });
}

SEA_EXPORT FILE* fopen64(const char* path, const char* mode) {
  SEA_NEXT(fopen64);
  return with_path("fopen64", AT_FDCWD, path,
                   fopen_want(mode),
                   [&](const char* p, int) { return real(p, mode); });
}

SEA_EXPORT FILE* freopen(const char* path, const char* mode, FILE* stream) {
  SEA_NEXT(freopen);
  if (!path) return real(path, mode, stream);
  return with_path("freopen", AT_FDCWD, path,
                   fopen_want(mode),
                   [&](const char* p, int) { return real(p, mode, stream); });
}

SEA_EXPORT FILE* freopen64(const char* path, const char* mode, FILE* stream) {
  SEA_NEXT(freopen64);
  if (!path) return real(path, mode, stream);
  return with_path("freopen64", AT_FDCWD, path,
                   fopen_want(mode),
                   [&](const char* p, int) { return real(p, mode, stream); });
}

// ---- stat ------------------------------------------------------------------

SEA_EXPORT int stat(const char* path, struct stat* buf) {
  SEA_NEXT(stat);
  return with_path("stat", AT_FDCWD, path, Want::existing,
                   [&](const char* p, int) { return real(p, buf); });
}

SEA_EXPORT int stat64(const char* path, struct stat64* buf) {
  SEA_NEXT(stat64);
  return with_path("stat64", AT_FDCWD, path, Want::existing,
                   [&](const char* p, int) { return real(p, buf); });
}

SEA_EXPORT int lstat(const char* path, struct stat* buf) {
  SEA_NEXT(lstat);
  return with_path("lstat", AT_FDCWD, path, Want::entry,
                   [&](const char* p, int) { return real(p, buf); });
}

SEA_EXPORT int lstat64(const char* path, struct stat64* buf) {
  SEA_NEXT(lstat64);
  return with_path("lstat64", AT_FDCWD, path, Want::entry,
                   [&](const char* p, int) { return real(p, buf); });
}

SEA_EXPORT int fstatat(int dirfd, const char* path, struct stat* buf, int flags) {
  SEA_NEXT(fstatat);
  return with_path("fstatat", dirfd, path, nofollow(flags),
                   [&](const char* p, int fd) { return real(fd, p, buf, flags); });
}

SEA_EXPORT int fstatat64(int dirfd, const char* path, struct stat64* buf, int flags) {
  SEA_NEXT(fstatat64);
  return with_path("fstatat64", dirfd, path, nofollow(flags),
                   [&](const char* p, int fd) { return real(fd, p, buf, flags); });
}

// Versioned entry points of older binaries; x86_64 and aarch64 have a single
// stat layout, so the version argument is not inspected.
SEA_EXPORT int __xstat(int, const char* path, struct stat* buf) {
  SEA_NEXT_OR(stat, -1);
  return with_path("__xstat", AT_FDCWD, path, Want::existing,
                   [&](const char* p, int) { return real(p, buf); });
}

SEA_EXPORT int __xstat64(int, const char* path, struct stat64* buf) {
  SEA_NEXT_OR(stat64, -1);
  return with_path("__xstat64", AT_FDCWD, path, Want::existing,
                   [&](const char* p, int) { return real(p, buf); });
}

SEA_EXPORT int __lxstat(int, const char* path, struct stat* buf) {
  SEA_NEXT_OR(lstat, -1);
  return with_path("__lxstat", AT_FDCWD, path, Want::entry,
                   [&](const char* p, int) { return real(p, buf); });
}

SEA_EXPORT int __lxstat64(int, const char* path, struct stat64* buf) {
  SEA_NEXT_OR(lstat64, -1);
  return with_path("__lxstat64", AT_FDCWD, path, Want::entry,
                   [&](const char* p, int) { return real(p, buf); });
}

SEA_EXPORT int __fxstatat(int, int dirfd, const char* path, struct stat* buf, int flags) {
  SEA_NEXT_OR(fstatat, -1);
  return with_path("__fxstatat", dirfd, path, nofollow(flags),
                   [&](const char* p, int fd) { return real(fd, p, buf, flags); });
}

SEA_EXPORT int __fxstatat64(int, int dirfd, const char* path, struct stat64* buf,
                            int flags) {
  SEA_NEXT_OR(fstatat64, -1);
  return with_path("__fxstatat64", dirfd, path, nofollow(flags),
                   [&](const char* p, int fd) { return real(fd, p, buf, flags); });
}

SEA_EXPORT int statx(int dirfd, const char* path, int flags, unsigned int mask,
                     struct statx* buf) {
  SEA_NEXT_OR(statx, -1);
  return with_path("statx", dirfd, path, nofollow(flags),
                   [&](const char* p, int fd) { return real(fd, p, flags, mask, buf); });
}

SEA_EXPORT int access(const char* path, int mode) {
  SEA_NEXT(access);
  return with_path("access", AT_FDCWD, path, Want::existing,
                   [&](const char* p, int) { return real(p, mode); });
}

SEA_EXPORT int faccessat(int dirfd, const char* path, int mode, int flags) {
  SEA_NEXT(faccessat);
  return with_path("faccessat", dirfd, path, nofollow(flags),
                   [&](const char* p, int fd) { return real(fd, p, mode, flags); });
}

SEA_EXPORT int euidaccess(const char* path, int mode) {
  SEA_NEXT(euidaccess);
  return with_path("euidaccess", AT_FDCWD, path, Want::existing,
                   [&](const char* p, int) { return real(p, mode); });
}

SEA_EXPORT int eaccess(const char* path, int mode) {
  SEA_NEXT(eaccess);
  return with_path("eaccess", AT_FDCWD, path, Want::existing,
                   [&](const char* p, int) { return real(p, mode); });
}

SEA_EXPORT int statfs(const char* path, struct statfs* buf) {
  SEA_NEXT(statfs);
  return with_path("statfs", AT_FDCWD, path, Want::existing,
                   [&](const char* p, int) { return real(p, buf); });
}

SEA_EXPORT int statfs64(const char* path, struct statfs64* buf) {
  SEA_NEXT(statfs64);
  return with_path("statfs64", AT_FDCWD, path, Want::existing,
                   [&](const char* p, int) { return real(p, buf); });
}

SEA_EXPORT int statvfs(const char* path, struct statvfs* buf) {
  SEA_NEXT(statvfs);
  return with_path("statvfs", AT_FDCWD, path, Want::existing,
                   [&](const char* p, int) { return real(p, buf); });
}

SEA_EXPORT int statvfs64(const char* path, struct statvfs64* buf) {
  SEA_NEXT(statvfs64);
  return with_path("statvfs64", AT_FDCWD, path, Want::existing,
                   [&](const char* p, int) { return real(p, buf); });
}

SEA_EXPORT ssize_t readlink(const char* path, char* buf, size_t size) {
  SEA_NEXT(readlink);
  return with_path("readlink", AT_FDCWD, path, Want::entry,
                   [&](const char* p, int) { return real(p, buf, size); });
}

SEA_EXPORT ssize_t readlinkat(int dirfd, const char* path, char* buf, size_t size) {
  SEA_NEXT(readlinkat);
  return with_path("readlinkat", dirfd, path, Want::entry,
                   [&](const char* p, int fd) { return real(fd, p, buf, size); });
}

SEA_EXPORT ssize_t getxattr(const char* path, const char* name, void* value, size_t size) {
  SEA_NEXT(getxattr);
  return with_path("getxattr", AT_FDCWD, path, Want::existing,
                   [&](const char* p, int) { return real(p, name, value, size); });
}

SEA_EXPORT ssize_t lgetxattr(const char* path, const char* name, void* value, size_t size) {
  SEA_NEXT(lgetxattr);
  return with_path("lgetxattr", AT_FDCWD, path, Want::entry,
                   [&](const char* p, int) { return real(p, name, value, size); });
}

SEA_EXPORT ssize_t listxattr(const char* path, char* list, size_t size) {
  SEA_NEXT(listxattr);
  return with_path("listxattr", AT_FDCWD, path, Want::existing,
                   [&](const char* p, int) { return real(p, list, size); });
}

SEA_EXPORT ssize_t llistxattr(const char* path, char* list, size_t size) {
  SEA_NEXT(llistxattr);
  return with_path("llistxattr", AT_FDCWD, path, Want::entry,
                   [&](const char* p, int) { return real(p, list, size); });
}

// ---- metadata updates --------------------------------------------------------

SEA_EXPORT int chmod(const char* path, mode_t mode) {
  SEA_NEXT(chmod);
  return with_all("chmod", AT_FDCWD, path, true, [&](const char* p, int) { return real(p, mode); });
}

SEA_EXPORT int fchmodat(int dirfd, const char* path, mode_t mode, int flags) {
  SEA_NEXT(fchmodat);
  return with_all("fchmodat", dirfd, path, !(flags & AT_SYMLINK_NOFOLLOW),
                  [&](const char* p, int fd) { return real(fd, p, mode, flags); });
}

SEA_EXPORT int chown(const char* path, uid_t owner, gid_t group) {
  SEA_NEXT(chown);
  return with_all("chown", AT_FDCWD, path, true,
                  [&](const char* p, int) { return real(p, owner, group); });
}

SEA_EXPORT int lchown(const char* path, uid_t owner, gid_t group) {
  SEA_NEXT(lchown);
  return with_all("lchown", AT_FDCWD, path, false,
                  [&](const char* p, int) { return real(p, owner, group); });
}

SEA_EXPORT int fchownat(int dirfd, const char* path, uid_t owner, gid_t group, int flags) {
  SEA_NEXT(fchownat);
  return with_all("fchownat", dirfd, path, !(flags & AT_SYMLINK_NOFOLLOW),
                  [&](const char* p, int fd) { return real(fd, p, owner, group, flags); });
}

SEA_EXPORT int truncate(const char* path, off_t length) {
  SEA_NEXT(truncate);
  return with_path("truncate", AT_FDCWD, path, Want::existing,
                   [&](const char* p, int) { return real(p, length); });
}

SEA_EXPORT int truncate64(const char* path, off64_t length) {
  SEA_NEXT(truncate64);
  return with_path("truncate64", AT_FDCWD, path, Want::existing,
                   [&](const char* p, int) { return real(p, length); });
}

SEA_EXPORT int utime(const char* path, const struct utimbuf* times) {
  SEA_NEXT(utime);
  return with_all("utime", AT_FDCWD, path, true, [&](const char* p, int) { return real(p, times); });
}

SEA_EXPORT int utimes(const char* path, const struct timeval times[2]) {
  SEA_NEXT(utimes);
  return with_all("utimes", AT_FDCWD, path, true, [&](const char* p, int) { return real(p, times); });
}

SEA_EXPORT int lutimes(const char* path, const struct timeval times[2]) {
  SEA_NEXT(lutimes);
  return with_all("lutimes", AT_FDCWD, path, false, [&](const char* p, int) { return real(p, times); });
}

SEA_EXPORT int futimesat(int dirfd, const char* path, const struct timeval times[2]) {
  SEA_NEXT(futimesat);
  if (!path) return real(dirfd, path, times);
  return with_all("futimesat", dirfd, path, true,
                  [&](const char* p, int fd) { return real(fd, p, times); });
}

SEA_EXPORT int utimensat(int dirfd, const char* path, const struct timespec times[2],
                         int flags) {
  SEA_NEXT(utimensat);
  return with_all("utimensat", dirfd, path, !(flags & AT_SYMLINK_NOFOLLOW),
                  [&](const char* p, int fd) { return real(fd, p, times, flags); });
}

SEA_EXPORT int setxattr(const char* path, const char* name, const void* value, size_t size,
                        int flags) {
  SEA_NEXT(setxattr);
  return with_all("setxattr", AT_FDCWD, path, true,
                  [&](const char* p, int) { return real(p, name, value, size, flags); });
}

SEA_EXPORT int lsetxattr(const char* path, const char* name, const void* value, size_t size,
                         int flags) {
  SEA_NEXT(lsetxattr);
  return with_all("lsetxattr", AT_FDCWD, path, false,
                  [&](const char* p, int) { return real(p, name, value, size, flags); });
}

SEA_EXPORT int removexattr(const char* path, const char* name) {
  SEA_NEXT(removexattr);
  return with_all("removexattr", AT_FDCWD, path, true,
                  [&](const char* p, int) { return real(p, name); });
}

SEA_EXPORT int lremovexattr(const char* path, const char* name) {
  SEA_NEXT(lremovexattr);
  return with_all("lremovexattr", AT_FDCWD, path, false,
                  [&](const char* p, int) { return real(p, name); });
}

// ---- namespace changes -------------------------------------------------------

SEA_EXPORT int unlink(const char* path) {
  SEA_NEXT(unlink);
  return with_all("unlink", AT_FDCWD, path, false, [&](const char* p, int) { return real(p); });
}

SEA_EXPORT int rmdir(const char* path) {
  SEA_NEXT(rmdir);
  return remove_dir("rmdir", AT_FDCWD, path, real);
}

SEA_EXPORT int unlinkat(int dirfd, const char* path, int flags) {
  SEA_NEXT(unlinkat);
  if (flags & AT_REMOVEDIR) {
    SEA_NEXT_OR(rmdir, -1);
    static const auto real_rmdir = real;
    return remove_dir("unlinkat", dirfd, path, real_rmdir);
  }
  return with_all("unlinkat", dirfd, path, false,
                  [&](const char* p, int fd) { return real(fd, p, flags); });
}

SEA_EXPORT int remove(const char* path) {
  SEA_NEXT(remove);
  bool dir = false;
  {
    Call c;
    if (c.active()) {
      try {
        if (auto rel = locate(*c.pm, AT_FDCWD, path))
          dir = is_dir_no_follow(existing_path(*c.pm, *rel));
      } catch (...) {
      }
    }
    c.restore();
  }
  if (dir) return rmdir(path);
  return with_all("remove", AT_FDCWD, path, false, [&](const char* p, int) { return real(p); });
}

SEA_EXPORT int mkdir(const char* path, mode_t mode) {
  SEA_NEXT(mkdir);
  Call c;
  if (!c.active()) return real(path, mode);
  std::string target;
  try {
    std::string outside;
    auto rel = locate(*c.pm, AT_FDCWD, path, &outside);
    if (!rel) {
      c.restore();
      return real(outside.empty() ? path : outside.c_str(), mode);
    }
    if (first_tier(*c.pm, *rel)) {
      errno = EEXIST;
      return -1;
    }
    const auto base = c.pm->config().base_index();
    c.pm->ensure_parent(base, *rel);
    target = c.pm->concrete(base, *rel);
  } catch (...) {
    c.restore();
    return real(path, mode);
  }
  trace("mkdir", path, target);
  c.restore();
  return real(target.c_str(), mode);
}

SEA_EXPORT int mkdirat(int dirfd, const char* path, mode_t mode) {
  SEA_NEXT(mkdirat);
  Call c;
  if (!c.active()) return real(dirfd, path, mode);
  std::string target;
  try {
    std::string outside;
    auto rel = locate(*c.pm, dirfd, path, &outside);
    if (!rel) {
      c.restore();
      if (!outside.empty()) return real(AT_FDCWD, outside.c_str(), mode);
      return real(dirfd, path, mode);
    }
    if (first_tier(*c.pm, *rel)) {
      errno = EEXIST;
      return -1;
    }
    const auto base = c.pm->config().base_index();
    c.pm->ensure_parent(base, *rel);
    target = c.pm->concrete(base, *rel);
  } catch (...) {
    c.restore();
    return real(dirfd, path, mode);
  }
  trace("mkdirat", path, target);
  c.restore();
  return real(AT_FDCWD, target.c_str(), mode);
}

SEA_EXPORT int mkfifo(const char* path, mode_t mode) {
  SEA_NEXT(mkfifo);
  return with_path("mkfifo", AT_FDCWD, path, Want::create_entry,
                   [&](const char* p, int) { return real(p, mode); });
}

SEA_EXPORT int mkfifoat(int dirfd, const char* path, mode_t mode) {
  SEA_NEXT(mkfifoat);
  return with_path("mkfifoat", dirfd, path, Want::create_entry,
                   [&](const char* p, int fd) { return real(fd, p, mode); });
}

SEA_EXPORT int rename(const char* oldpath, const char* newpath) {
  return do_rename(AT_FDCWD, oldpath, AT_FDCWD, newpath, 0,
                   [](int ofd, const char* o, int nfd, const char* n, unsigned) {
                     SEA_NEXT(renameat);
                     return real(ofd, o, nfd, n);
                   });
}

SEA_EXPORT int renameat(int olddirfd, const char* oldpath, int newdirfd, const char* newpath) {
  return do_rename(olddirfd, oldpath, newdirfd, newpath, 0,
                   [](int ofd, const char* o, int nfd, const char* n, unsigned) {
                     SEA_NEXT(renameat);
                     return real(ofd, o, nfd, n);
                   });
}

SEA_EXPORT int renameat2(int olddirfd, const char* oldpath, int newdirfd, const char* newpath,
                         unsigned int flags) {
  return do_rename(olddirfd, oldpath, newdirfd, newpath, flags,
                   [](int ofd, const char* o, int nfd, const char* n, unsigned f) {
                     SEA_NEXT(renameat2);
                     if (f == 0) {
                       SEA_NEXT(renameat);
                       return real(ofd, o, nfd, n);
                     }
                     return real(ofd, o, nfd, n, f);
                   });
}

SEA_EXPORT int link(const char* oldpath, const char* newpath) {
  return do_link(AT_FDCWD, oldpath, AT_FDCWD, newpath, 0);
}

SEA_EXPORT int linkat(int olddirfd, const char* oldpath, int newdirfd, const char* newpath,
                      int flags) {
  return do_link(olddirfd, oldpath, newdirfd, newpath, flags);
}

SEA_EXPORT int symlink(const char* target, const char* linkpath) {
  SEA_NEXT(symlink);
  return with_path("symlink", AT_FDCWD, linkpath, Want::create_entry,
                   [&](const char* p, int) { return real(target, p); });
}

SEA_EXPORT int symlinkat(const char* target, int dirfd, const char* linkpath) {
  SEA_NEXT(symlinkat);
  return with_path("symlinkat", dirfd, linkpath, Want::create_entry,
                   [&](const char* p, int fd) { return real(target, fd, p); });
}

// ---- temporary files ---------------------------------------------------------

SEA_EXPORT int mkstemp(char* templ) {
  SEA_NEXT(mkstemp);
  return with_template(templ, 0, false, [&](char* t) { return real(t); });
}

SEA_EXPORT int mkstemp64(char* templ) {
  SEA_NEXT(mkstemp64);
  return with_template(templ, 0, false, [&](char* t) { return real(t); });
}

SEA_EXPORT int mkostemp(char* templ, int flags) {
  SEA_NEXT(mkostemp);
  return with_template(templ, 0, false, [&](char* t) { return real(t, flags); });
}

SEA_EXPORT int mkostemp64(char* templ, int flags) {
  SEA_NEXT(mkostemp64);
  return with_template(templ, 0, false, [&](char* t) { return real(t, flags); });
}

SEA_EXPORT int mkstemps(char* templ, int suffixlen) {
  SEA_NEXT(mkstemps);
  return with_template(templ, suffixlen, false, [&](char* t) { return real(t, suffixlen); });
}

SEA_EXPORT int mkstemps64(char* templ, int suffixlen) {
  SEA_NEXT(mkstemps64);
  return with_template(templ, suffixlen, false, [&](char* t) { return real(t, suffixlen); });
}

SEA_EXPORT int mkostemps(char* templ, int suffixlen, int flags) {
  SEA_NEXT(mkostemps);
  return with_template(templ, suffixlen, false,
                       [&](char* t) { return real(t, suffixlen, flags); });
}

SEA_EXPORT int mkostemps64(char* templ, int suffixlen, int flags) {
  SEA_NEXT(mkostemps64);
  return with_template(templ, suffixlen, false,
                       [&](char* t) { return real(t, suffixlen, flags); });
}

SEA_EXPORT char* mkdtemp(char* templ) {
  SEA_NEXT(mkdtemp);
  char* r = with_template(templ, 0, true, [&](char* t) { return real(t); });
  return r ? templ : nullptr;
}

// ---- directory streams -------------------------------------------------------

SEA_EXPORT DIR* opendir(const char* path) {
  SEA_NEXT(opendir);
  auto entries = merged_entries(AT_FDCWD, path);
  DIR* d = with_path("opendir", AT_FDCWD, path, Want::existing,
                     [&](const char* p, int) { return real(p); });
  if (d && entries) register_stream(d, std::move(*entries));
  return d;
}

SEA_EXPORT DIR* fdopendir(int fd) {
  SEA_NEXT(fdopendir);
  DIR* d = real(fd);
  if (!d) return d;
  Call c;
  if (!c.active()) return d;
  try {
    if (auto p = fd_path(fd)) {
      if (auto rev = c.pm->reverse(*p)) {
        if (auto rel = c.pm->relative(rev->second)) {
          if (auto entries = c.pm->list_entries(*rel))
            register_stream(d, std::move(*entries));
        }
      }
    }
  } catch (...) {
  }
  c.restore();
  return d;
}

SEA_EXPORT struct dirent* readdir(DIR* d) {
  if (auto* s = find_stream(d)) {
    if (s->pos >= s->entries.size()) return nullptr;
    fill(s->ent, s->entries[s->pos], s->pos);
    ++s->pos;
    return &s->ent;
  }
  SEA_NEXT(readdir);
  return real(d);
}

SEA_EXPORT struct dirent64* readdir64(DIR* d) {
  if (auto* s = find_stream(d)) {
    if (s->pos >= s->entries.size()) return nullptr;
    fill(s->ent64, s->entries[s->pos], s->pos);
    ++s->pos;
    return &s->ent64;
  }
  SEA_NEXT(readdir64);
  return real(d);
}

SEA_EXPORT int closedir(DIR* d) {
  {
    std::lock_guard lock(dirs_mutex());
    auto it = dirs().find(d);
    if (it != dirs().end()) {
      delete it->second;
      dirs().erase(it);
    }
  }
  SEA_NEXT(closedir);
  return real(d);
}

SEA_EXPORT void rewinddir(DIR* d) {
  if (auto* s = find_stream(d)) s->pos = 0;
  SEA_NEXT(rewinddir);
  real(d);
}

SEA_EXPORT long telldir(DIR* d) {
  if (auto* s = find_stream(d)) return long(s->pos);
  SEA_NEXT(telldir);
  return real(d);
}

SEA_EXPORT void seekdir(DIR* d, long pos) {
  if (auto* s = find_stream(d)) {
    s->pos = std::size_t(std::max(pos, 0L));
    return;
  }
  SEA_NEXT(seekdir);
  real(d, pos);
}

SEA_EXPORT int scandir(const char* dir, struct dirent*** namelist,
                       int (*selector)(const struct dirent*),
                       int (*cmp)(const struct dirent**, const struct dirent**)) {
  auto entries = merged_entries(AT_FDCWD, dir);
  if (entries) return scan(dir, namelist, selector, cmp, *entries);
  SEA_NEXT(scandir);
  Guard g;
  return with_path("scandir", AT_FDCWD, dir, Want::existing,
                   [&](const char* p, int) { return real(p, namelist, selector, cmp); });
}

SEA_EXPORT int scandir64(const char* dir, struct dirent64*** namelist,
                         int (*selector)(const struct dirent64*),
                         int (*cmp)(const struct dirent64**, const struct dirent64**)) {
  auto entries = merged_entries(AT_FDCWD, dir);
  if (entries) return scan(dir, namelist, selector, cmp, *entries);
  SEA_NEXT(scandir64);
  return with_path("scandir64", AT_FDCWD, dir, Want::existing,
                   [&](const char* p, int) { return real(p, namelist, selector, cmp); });
}

// ---- working directory and canonical names -------------------------------------

SEA_EXPORT int chdir(const char* path) {
  SEA_NEXT(chdir);
  return with_path("chdir", AT_FDCWD, path, Want::existing,
                   [&](const char* p, int) { return real(p); });
}

SEA_EXPORT char* getcwd(char* buf, size_t size) {
  SEA_NEXT(getcwd);
  Call c;
  char* r = real(buf, size);
  if (!r || !c.active()) return r;
  std::string cwd = r;
  bool mapped = false;
  try {
    mapped = virtualize(cwd);
  } catch (...) {
  }
  if (!mapped) return r;
  if (buf) {
    if (cwd.size() + 1 > size) {
      errno = ERANGE;
      return nullptr;
    }
    std::memcpy(buf, cwd.c_str(), cwd.size() + 1);
    return buf;
  }
  std::free(r);
  if (size != 0 && cwd.size() + 1 > size) {
    errno = ERANGE;
    return nullptr;
  }
  return ::strdup(cwd.c_str());
}

SEA_EXPORT char* get_current_dir_name() {
  SEA_NEXT(get_current_dir_name);
  Call c;
  char* r = real();
  if (!r || !c.active()) return r;
  std::string cwd = r;
  try {
    if (virtualize(cwd)) {
      std::free(r);
      return ::strdup(cwd.c_str());
    }
  } catch (...) {
  }
  return r;
}

SEA_EXPORT char* realpath(const char* path, char* resolved) {
  SEA_NEXT_V(realpath, "GLIBC_2.3");
  Call c;
  if (!c.active()) return real(path, resolved);
  std::optional<std::string> rel;
  std::string outside;
  try {
    rel = locate(*c.pm, AT_FDCWD, path, &outside);
  } catch (...) {
  }
  if (!rel) {
    c.restore();
    return real(outside.empty() ? path : outside.c_str(), resolved);
  }
  std::optional<std::string> target;
  try {
    target = resolve(*c.pm, *rel, Want::existing, outside);
  } catch (...) {
  }
  c.restore();
  if (!target) return real(outside.empty() ? path : outside.c_str(), resolved);
  char* r = real(target->c_str(), nullptr);
  if (!r) return nullptr;
  std::string out = r;
  std::free(r);
  try {
    virtualize(out);
  } catch (...) {
  }
  if (resolved) {
    if (out.size() >= PATH_MAX) {
      errno = ENAMETOOLONG;
      return nullptr;
    }
    std::memcpy(resolved, out.c_str(), out.size() + 1);
    return resolved;
  }
  return ::strdup(out.c_str());
}

SEA_EXPORT char* canonicalize_file_name(const char* path) { return realpath(path, nullptr); }

// Fortified builds call these instead of the plain names.
SEA_EXPORT char* __realpath_chk(const char* path, char* resolved, size_t resolvedlen) {
  if (resolvedlen < PATH_MAX) ::abort();
  return realpath(path, resolved);
}

SEA_EXPORT char* __getcwd_chk(char* buf, size_t size, size_t buflen) {
  if (size > buflen) ::abort();
  return getcwd(buf, size);
}

SEA_EXPORT ssize_t __readlink_chk(const char* path, char* buf, size_t len, size_t buflen) {
  if (len > buflen) ::abort();
  return readlink(path, buf, len);
}

SEA_EXPORT ssize_t __readlinkat_chk(int dirfd, const char* path, char* buf, size_t len,
                                    size_t buflen) {
  if (len > buflen) ::abort();
  return readlinkat(dirfd, path, buf, len);
}

// ---- exec --------------------------------------------------------------------

namespace {

// Resolved before the exec call so the guard is released first: after
// vfork the child shares the parent's thread state, and a successful exec
// never returns to reset it.
std::string exec_path(const char* path) {
  std::string target = path;
  with_path("exec", AT_FDCWD, path, Want::existing, [&](const char* p, int) {
    target = p;
    return 0;
  });
  return target;
}

}  // namespace

SEA_EXPORT int execve(const char* path, char* const argv[], char* const envp[]) {
  SEA_NEXT(execve);
  if (t_inside) return real(path, argv, envp);
  auto target = exec_path(path);
  return real(target.c_str(), argv, envp);
}

SEA_EXPORT int execv(const char* path, char* const argv[]) {
  SEA_NEXT(execv);
  if (t_inside) return real(path, argv);
  auto target = exec_path(path);
  return real(target.c_str(), argv);
}

SEA_EXPORT int execvp(const char* file, char* const argv[]) {
  SEA_NEXT(execvp);
  if (t_inside || !std::strchr(file, '/')) return real(file, argv);
  auto target = exec_path(file);
  return real(target.c_str(), argv);
}
