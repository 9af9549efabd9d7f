#include "sea/diag.hpp"

#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <string>

namespace sea::diag {

namespace {

int initial_level() {
  const char* env = std::getenv("SEA_DEBUG");
  return env ? std::atoi(env) : 0;
}

std::atomic<int>& level_ref() {
  static std::atomic<int> value{initial_level()};
  return value;
}

void emit(std::string_view tag, std::string_view text) {
  std::string line = "sea: ";
  line.append(tag);
  line.append(text);
  line.push_back('\n');
  // A single write keeps lines from concurrent processes intact.
  [[maybe_unused]] auto n = ::write(STDERR_FILENO, line.data(), line.size());
}

}  // namespace

int level() { return level_ref().load(std::memory_order_relaxed); }
void set_level(int l) { level_ref().store(l, std::memory_order_relaxed); }

void message(std::string_view text) { emit("", text); }
void warn(std::string_view text) { emit("warning: ", text); }

void debug(int min_level, std::string_view text) {
  if (level() >= min_level) emit("", text);
}

}  // namespace sea::diag
