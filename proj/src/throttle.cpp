#include "sea/throttle.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <time.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <system_error>

namespace sea {
namespace {

std::int64_t monotonic_ns() {
  struct timespec ts {};
  ::clock_gettime(CLOCK_MONOTONIC, &ts);
  return std::int64_t(ts.tv_sec) * 1'000'000'000 + ts.tv_nsec;
}

void sleep_until(std::int64_t deadline_ns) {
  struct timespec ts {};
  ts.tv_sec = deadline_ns / 1'000'000'000;
  ts.tv_nsec = deadline_ns % 1'000'000'000;
  while (::clock_nanosleep(CLOCK_MONOTONIC, TIMER_ABSTIME, &ts, nullptr) == EINTR) {
  }
}

}  // namespace

Throttle::Throttle(std::filesystem::path state_file, std::uint64_t bytes_per_second)
    : state_file_(std::move(state_file)), rate_(bytes_per_second) {
  if (rate_ == 0) return;
  fd_ = ::open(state_file_.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0)
    throw std::system_error(errno, std::generic_category(),
                            "open " + state_file_.string());
}

Throttle::~Throttle() {
  if (fd_ >= 0) ::close(fd_);
}

void Throttle::consume(std::uint64_t bytes) {
  if (rate_ == 0 || bytes == 0) return;
  const auto cost = std::int64_t(double(bytes) * 1e9 / double(rate_));

  while (::flock(fd_, LOCK_EX) != 0 && errno == EINTR) {
  }
  std::int64_t idle_at = 0;
  if (::pread(fd_, &idle_at, sizeof idle_at, 0) != sizeof idle_at) idle_at = 0;
  const std::int64_t now = monotonic_ns();
  const std::int64_t done = std::max(now, idle_at) + cost;
  [[maybe_unused]] auto n = ::pwrite(fd_, &done, sizeof done, 0);
  ::flock(fd_, LOCK_UN);

  sleep_until(done);
}

}  // namespace sea
