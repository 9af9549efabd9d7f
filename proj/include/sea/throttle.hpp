#pragma once

#include <cstdint>
#include <filesystem>

namespace sea {

// Bandwidth cap shared by every process that opens the same state file. The
// file holds the monotonic time at which the emulated device is next idle;
// each consumer books its transfer after that point and sleeps until the
// booking ends.
class Throttle {
 public:
  Throttle(std::filesystem::path state_file, std::uint64_t bytes_per_second);
  ~Throttle();
  Throttle(const Throttle&) = delete;
  Throttle& operator=(const Throttle&) = delete;

  void consume(std::uint64_t bytes);

  std::uint64_t rate() const { return rate_; }
  const std::filesystem::path& state_file() const { return state_file_; }

 private:
  std::filesystem::path state_file_;
  std::uint64_t rate_;
  int fd_ = -1;
};

// Transfers are booked in chunks of this size.
inline constexpr std::size_t kThrottleChunk = 1 << 20;

}  // namespace sea
