#pragma once

#include <sys/types.h>

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sea/config.hpp"
#include "sea/lifecycle.hpp"
#include "sea/rules.hpp"
#include "sea/session.hpp"

namespace sea {

// Background flusher: a forked child running flush cycles every
// flush_interval until stopped. It inherits the caller's lease.
class FlusherProcess {
 public:
  FlusherProcess(const SeaConfig& cfg, const RuleSet& rules, const Session& session);
  ~FlusherProcess();
  FlusherProcess(const FlusherProcess&) = delete;
  FlusherProcess& operator=(const FlusherProcess&) = delete;

  // Lets the current cycle finish, then reaps the child. Idempotent.
  void stop();
  pid_t pid() const { return pid_; }

 private:
  pid_t pid_ = -1;
};

// Exit status used when the command succeeded but finalize did not.
inline constexpr int kFinalizeFailedStatus = 70;

// The shim library: SEA_PRELOAD_LIB, a copy next to the running executable,
// or the one from the build tree. Throws std::runtime_error when none exists.
std::filesystem::path find_preload_library();

// Environment for a child running under the shim.
std::map<std::string, std::string> preload_environment(const std::filesystem::path& library,
                                                       const std::filesystem::path& config_file);

// fork + exec with extra environment; returns the child pid.
pid_t spawn(const std::vector<std::string>& argv,
            const std::map<std::string, std::string>& env);

// waitpid, mapped to a shell-style status (128 + signal when killed).
int wait_status(pid_t pid);

struct LaunchOptions {
  std::filesystem::path config_file;
  std::vector<std::string> command;
  std::filesystem::path preload_library;  // empty: find_preload_library()
  std::string run_id;                     // empty: default_run_id()
};

struct LaunchResult {
  int command_status = 0;
  int exit_status = 0;  // command status, escalated when finalize fails
  PrefetchReport prefetch;
  FinalReport final_report;
  double command_seconds = 0;
  double finalize_seconds = 0;
};

// Session setup, lease, flusher, prefetch, command under the shim, finalize.
// Throws LeaseConflict when another launcher owns the session.
LaunchResult sea_run(const LaunchOptions& opts);

double seconds_since(std::chrono::steady_clock::time_point start);

}  // namespace sea
