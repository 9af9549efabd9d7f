#include "sea/fsutil.hpp"

#include <dirent.h>
#include <fcntl.h>
#include <openssl/evp.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <memory>
#include <system_error>

#include "sea/paths.hpp"
#include "sea/throttle.hpp"

namespace sea {
namespace {

[[noreturn]] void fail(const std::string& what) {
  throw std::system_error(errno, std::generic_category(), what);
}

class Fd {
 public:
  explicit Fd(int fd) : fd_(fd) {}
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  int get() const { return fd_; }
  int release() { return std::exchange(fd_, -1); }

 private:
  int fd_;
};

struct DigestDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
      throw std::runtime_error("sha256 init failed");
  }
  void update(const void* data, std::size_t n) {
    EVP_DigestUpdate(ctx_.get(), data, n);
  }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md, &len);
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(len * 2, '0');
    for (unsigned i = 0; i < len; ++i) {
      out[2 * i] = digits[md[i] >> 4];
      out[2 * i + 1] = digits[md[i] & 15];
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, DigestDeleter> ctx_;
};

ssize_t read_full(int fd, char* buf, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    ssize_t r = ::read(fd, buf + got, n - got);
    if (r < 0) {
      if (errno == EINTR) continue;
      return -1;
    }
    if (r == 0) break;
    got += std::size_t(r);
  }
  return ssize_t(got);
}

bool write_full(int fd, const char* buf, std::size_t n) {
  while (n > 0) {
    ssize_t w = ::write(fd, buf, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    buf += w;
    n -= std::size_t(w);
  }
  return true;
}

void sync_directory(const std::string& dir) {
  int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

}  // namespace

std::optional<FileVersion> regular_file_version(const std::string& path) {
  struct stat st {};
  if (::lstat(path.c_str(), &st) != 0 || !S_ISREG(st.st_mode)) return std::nullopt;
  return FileVersion{std::uint64_t(st.st_size),
                     std::int64_t(st.st_mtim.tv_sec) * 1'000'000'000 + st.st_mtim.tv_nsec};
}

std::string sha256_file(const std::string& path, Throttle* throttle) {
  Fd in(::open(path.c_str(), O_RDONLY | O_CLOEXEC));
  if (in.get() < 0) fail("open " + path);
  Sha256 digest;
  std::unique_ptr<char[]> buf(new char[kThrottleChunk]);
  for (;;) {
    ssize_t n = read_full(in.get(), buf.get(), kThrottleChunk);
    if (n < 0) fail("read " + path);
    if (n == 0) break;
    if (throttle) throttle->consume(std::uint64_t(n));
    digest.update(buf.get(), std::size_t(n));
  }
  return digest.hex();
}

std::string sha256_hex(const void* data, std::size_t size) {
  Sha256 digest;
  digest.update(data, size);
  return digest.hex();
}

std::string replica_temp_name(const std::string& dst) {
  auto slash = dst.rfind('/');
  return dst.substr(0, slash + 1) + ".sea_tmp." + dst.substr(slash + 1);
}

CopyResult replicate_file(const std::string& src, const std::string& dst,
                          Throttle* read_throttle, Throttle* write_throttle) {
  Fd in(::open(src.c_str(), O_RDONLY | O_CLOEXEC));
  if (in.get() < 0) fail("open " + src);
  struct stat st {};
  if (::fstat(in.get(), &st) != 0) fail("stat " + src);

  const std::string tmp = replica_temp_name(dst);
  Fd out(::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0600));
  if (out.get() < 0) fail("create " + tmp);

  CopyResult result;
  Sha256 digest;
  std::unique_ptr<char[]> buf(new char[kThrottleChunk]);
  for (;;) {
    ssize_t n = read_full(in.get(), buf.get(), kThrottleChunk);
    if (n < 0) fail("read " + src);
    if (n == 0) break;
    if (read_throttle) read_throttle->consume(std::uint64_t(n));
    if (write_throttle) write_throttle->consume(std::uint64_t(n));
    digest.update(buf.get(), std::size_t(n));
    if (!write_full(out.get(), buf.get(), std::size_t(n))) fail("write " + tmp);
    result.bytes += std::uint64_t(n);
  }
  result.sha256 = digest.hex();

  if (::fchmod(out.get(), st.st_mode & 07777) != 0) fail("chmod " + tmp);
  struct timespec times[2] = {st.st_atim, st.st_mtim};
  if (::futimens(out.get(), times) != 0) fail("utimens " + tmp);
  if (::fsync(out.get()) != 0) fail("fsync " + tmp);
  if (::close(out.release()) != 0) fail("close " + tmp);
  if (::rename(tmp.c_str(), dst.c_str()) != 0) {
    int saved = errno;
    ::unlink(tmp.c_str());
    errno = saved;
    fail("rename " + tmp);
  }
  sync_directory(paths::parent(dst));
  return result;
}

std::vector<WalkEntry> walk_files(const std::filesystem::path& root,
                                  const std::set<std::string>& skip_top) {
  namespace fs = std::filesystem;
  std::vector<WalkEntry> out;
  std::error_code ec;
  auto opts = fs::directory_options::skip_permission_denied;
  fs::recursive_directory_iterator it(root, opts, ec), end;
  const std::string base = paths::normalize(root.string());
  for (; !ec && it != end; it.increment(ec)) {
    const auto& entry = *it;
    std::string path = entry.path().string();
    auto rel = paths::strip_prefix(path, base);
    if (!rel) continue;
    if (it.depth() == 0 && skip_top.count(*rel)) {
      it.disable_recursion_pending();
      continue;
    }
    std::error_code sec;
    if (entry.is_symlink(sec) || !entry.is_regular_file(sec)) continue;
    out.push_back({*rel, path});
  }
  return out;
}

std::set<std::string> open_write_handles() {
  std::set<std::string> out;
  DIR* proc = ::opendir("/proc");
  if (!proc) return out;
  const pid_t self = ::getpid();
  char link[4096];
  while (auto* pe = ::readdir(proc)) {
    int pid = 0;
    auto [_, ec] = std::from_chars(pe->d_name, pe->d_name + std::strlen(pe->d_name), pid);
    if (ec != std::errc{} || pid == self) continue;
    std::string fd_dir = "/proc/" + std::string(pe->d_name) + "/fd";
    DIR* fds = ::opendir(fd_dir.c_str());
    if (!fds) continue;
    while (auto* fe = ::readdir(fds)) {
      if (fe->d_name[0] == '.') continue;
      std::string fd_path = fd_dir + "/" + fe->d_name;
      ssize_t n = ::readlink(fd_path.c_str(), link, sizeof link - 1);
      if (n <= 0 || link[0] != '/') continue;
      link[n] = '\0';
      std::string info_path =
          "/proc/" + std::string(pe->d_name) + "/fdinfo/" + fe->d_name;
      int info = ::open(info_path.c_str(), O_RDONLY | O_CLOEXEC);
      if (info < 0) continue;
      char text[512];
      ssize_t m = ::read(info, text, sizeof text - 1);
      ::close(info);
      if (m <= 0) continue;
      text[m] = '\0';
      const char* flags = std::strstr(text, "flags:");
      if (!flags) continue;
      unsigned long value = std::strtoul(flags + 6, nullptr, 8);
      if (value & (O_WRONLY | O_RDWR)) out.insert(link);
    }
    ::closedir(fds);
  }
  ::closedir(proc);
  return out;
}

}  // namespace sea
