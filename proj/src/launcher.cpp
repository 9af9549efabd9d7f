#include "sea/launcher.hpp"

#include <signal.h>
#include <sys/wait.h>
#include <time.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <system_error>

#include "sea/diag.hpp"

namespace sea {
namespace fs = std::filesystem;

namespace {

[[noreturn]] void flusher_main(const SeaConfig& cfg, const RuleSet& rules,
                               const Session& session, const sigset_t& stop_set) {
  int status = 0;
  try {
    Lifecycle lifecycle(cfg, rules, session);
    const auto interval = std::chrono::duration_cast<std::chrono::nanoseconds>(cfg.flush_interval);
    struct timespec wait {};
    wait.tv_sec = interval.count() / 1'000'000'000;
    wait.tv_nsec = interval.count() % 1'000'000'000;
    for (;;) {
      lifecycle.flush_cycle(false);
      int sig = ::sigtimedwait(&stop_set, nullptr, &wait);
      if (sig == SIGTERM || sig == SIGINT) break;
    }
  } catch (const std::exception& e) {
    diag::warn(std::string("flusher: ") + e.what());
    status = 1;
  }
  ::_exit(status);
}

}  // namespace

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

FlusherProcess::FlusherProcess(const SeaConfig& cfg, const RuleSet& rules,
                               const Session& session) {
  sigset_t stop_set, old;
  sigemptyset(&stop_set);
  sigaddset(&stop_set, SIGTERM);
  sigaddset(&stop_set, SIGINT);
  // Blocked across the fork so a stop request is never lost.
  ::sigprocmask(SIG_BLOCK, &stop_set, &old);
  pid_ = ::fork();
  if (pid_ == 0) flusher_main(cfg, rules, session, stop_set);
  int err = errno;
  ::sigprocmask(SIG_SETMASK, &old, nullptr);
  if (pid_ < 0) throw std::system_error(err, std::generic_category(), "fork flusher");
  diag::debug(1, "flusher pid " + std::to_string(pid_));
}

FlusherProcess::~FlusherProcess() {
  try {
    stop();
  } catch (...) {
  }
}

void FlusherProcess::stop() {
  if (pid_ <= 0) return;
  ::kill(pid_, SIGTERM);
  int status = wait_status(pid_);
  if (status != 0) diag::warn("flusher exited with status " + std::to_string(status));
  pid_ = -1;
}

fs::path find_preload_library() {
  if (const char* env = std::getenv("SEA_PRELOAD_LIB"); env && *env) {
    if (fs::exists(env)) return env;
    throw std::runtime_error(std::string("SEA_PRELOAD_LIB names a missing file: ") + env);
  }
  std::error_code ec;
  auto exe = fs::read_symlink("/proc/self/exe", ec);
  std::vector<fs::path> candidates;
  if (!ec) {
    auto dir = exe.parent_path();
    candidates = {dir / "libsea_preload.so", dir / "../lib/libsea_preload.so",
                  dir / "../libsea_preload.so"};
  }
#ifdef SEA_PRELOAD_BUILD_PATH
  candidates.emplace_back(SEA_PRELOAD_BUILD_PATH);
#endif
  for (const auto& c : candidates)
    if (fs::exists(c, ec)) return fs::weakly_canonical(c);
  throw std::runtime_error("preload library libsea_preload.so not found; set SEA_PRELOAD_LIB");
}

std::map<std::string, std::string> preload_environment(const fs::path& library,
                                                       const fs::path& config_file) {
  std::string preload = fs::absolute(library).string();
  if (const char* prev = std::getenv("LD_PRELOAD"); prev && *prev)
    preload += std::string(":") + prev;
  return {{"LD_PRELOAD", preload}, {"SEA_HOME", fs::absolute(config_file).string()}};
}

pid_t spawn(const std::vector<std::string>& argv, const std::map<std::string, std::string>& env) {
  if (argv.empty()) throw std::invalid_argument("empty command");
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  pid_t pid = ::fork();
  if (pid < 0) throw std::system_error(errno, std::generic_category(), "fork");
  if (pid == 0) {
    for (const auto& [k, v] : env) ::setenv(k.c_str(), v.c_str(), 1);
    ::execvp(args[0], args.data());
    diag::warn("cannot execute " + argv[0] + ": " + std::strerror(errno));
    ::_exit(127);
  }
  return pid;
}

int wait_status(pid_t pid) {
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) throw std::system_error(errno, std::generic_category(), "waitpid");
  }
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return 1;
}

LaunchResult sea_run(const LaunchOptions& opts) {
  auto cfg = load_config_file(opts.config_file);
  auto library = opts.preload_library.empty() ? find_preload_library() : opts.preload_library;
  if (!fs::exists(library)) throw std::runtime_error("preload library missing: " + library.string());

  for (const auto& t : cfg.tiers) fs::create_directories(t.root);
  Session session(cfg, opts.run_id.empty() ? default_run_id() : opts.run_id);
  Lease lease(session.lock_file());
  auto rules = load_rules(cfg);

  LaunchResult out;
  {
    Lifecycle lifecycle(cfg, rules, session);
    out.prefetch = lifecycle.prefetch();
  }

  FlusherProcess flusher(cfg, rules, session);
  auto start = std::chrono::steady_clock::now();
  // The command owns the terminal's interrupts; finalize still runs after.
  struct sigaction ignore {}, old_int {}, old_quit {};
  ignore.sa_handler = SIG_IGN;
  ::sigaction(SIGINT, &ignore, &old_int);
  ::sigaction(SIGQUIT, &ignore, &old_quit);
  try {
    pid_t pid = spawn(opts.command, preload_environment(library, opts.config_file));
    out.command_status = wait_status(pid);
  } catch (...) {
    ::sigaction(SIGINT, &old_int, nullptr);
    ::sigaction(SIGQUIT, &old_quit, nullptr);
    throw;
  }
  ::sigaction(SIGINT, &old_int, nullptr);
  ::sigaction(SIGQUIT, &old_quit, nullptr);
  out.command_seconds = seconds_since(start);

  flusher.stop();
  auto fin_start = std::chrono::steady_clock::now();
  {
    Lifecycle lifecycle(cfg, rules, session);
    out.final_report = lifecycle.finalize();
  }
  out.finalize_seconds = seconds_since(fin_start);

  out.exit_status = out.command_status;
  if (out.exit_status == 0 && !out.final_report.ok()) out.exit_status = kFinalizeFailedStatus;
  return out;
}

}  // namespace sea
