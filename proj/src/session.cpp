#include "sea/session.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <system_error>
#include <utility>

#include "sea/pathmap.hpp"

namespace sea {

std::string default_run_id() {
  if (const char* id = std::getenv("SEA_RUN_ID"); id && *id) return id;
  char host[256] = {};
  if (::gethostname(host, sizeof host - 1) != 0 || !*host) return "local";
  return host;
}

Session::Session(const SeaConfig& cfg, std::string run_id)
    : run_id_(std::move(run_id)),
      dir_(cfg.base().root / std::string(kSessionDirName) / run_id_) {
  if (run_id_.empty() || run_id_.find('/') != std::string::npos || run_id_ == "." ||
      run_id_ == "..")
    throw std::invalid_argument("invalid run id '" + run_id_ + "'");
  std::filesystem::create_directories(dir_);
}

void Session::append_report(const std::string& json_line) const {
  int fd = ::open(reports_file().c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) return;
  std::string line = json_line + "\n";
  [[maybe_unused]] auto n = ::write(fd, line.data(), line.size());
  ::close(fd);
}

Lease::Lease(const std::filesystem::path& lock_file) {
  fd_ = ::open(lock_file.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0)
    throw std::system_error(errno, std::generic_category(), "open " + lock_file.string());
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    int err = errno;
    ::close(fd_);
    fd_ = -1;
    if (err == EWOULDBLOCK)
      throw LeaseConflict("session " + lock_file.parent_path().string() +
                          " is held by another flusher");
    throw std::system_error(err, std::generic_category(), "flock " + lock_file.string());
  }
  std::string pid = std::to_string(::getpid()) + "\n";
  if (::ftruncate(fd_, 0) == 0) {
    [[maybe_unused]] auto n = ::pwrite(fd_, pid.data(), pid.size(), 0);
  }
}

Lease::~Lease() {
  if (fd_ >= 0) ::close(fd_);
}

Lease::Lease(Lease&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}

}  // namespace sea
