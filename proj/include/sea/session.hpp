#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "sea/config.hpp"

namespace sea {

// SEA_RUN_ID when set, otherwise the host name.
std::string default_run_id();

// <base>/.sea_session/<run-id>/, created on construction.
class Session {
 public:
  Session(const SeaConfig& cfg, std::string run_id = default_run_id());

  const std::string& run_id() const { return run_id_; }
  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path lock_file() const { return dir_ / "lock"; }
  std::filesystem::path journal_file() const { return dir_ / "journal.jsonl"; }
  std::filesystem::path pins_file() const { return dir_ / "pins"; }
  std::filesystem::path reports_file() const { return dir_ / "reports.jsonl"; }
  // Shared by every process reading or writing the base tier.
  std::filesystem::path throttle_file() const { return dir_.parent_path() / "throttle"; }

  void append_report(const std::string& json_line) const;

 private:
  std::string run_id_;
  std::filesystem::path dir_;
};

class LeaseConflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exclusive flock on the session lock file, held for the object's lifetime
// and by any child forked while it is held.
class Lease {
 public:
  // Throws LeaseConflict when another process holds the lease.
  explicit Lease(const std::filesystem::path& lock_file);
  ~Lease();
  Lease(Lease&& other) noexcept;
  Lease& operator=(Lease&&) = delete;
  Lease(const Lease&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace sea
