#pragma once

#include <chrono>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "sea/config.hpp"
#include "sea/fsutil.hpp"
#include "sea/journal.hpp"
#include "sea/pathmap.hpp"
#include "sea/rules.hpp"
#include "sea/session.hpp"
#include "sea/throttle.hpp"

namespace sea {

struct FileFailure {
  std::string path;
  std::string error;
};

struct CycleReport {
  std::size_t replicated = 0;  // copies written to base, any mode
  std::size_t copied = 0;      // copy mode
  std::size_t removed = 0;     // remove mode
  std::size_t moved = 0;       // move mode, evicted after a verified replica
  std::size_t skipped_unstable = 0;
  std::uint64_t bytes = 0;
  std::vector<FileFailure> failures;
  std::vector<std::string> duplicates;  // same path on several cache tiers
  std::vector<std::string> kept;        // keep mode files left in cache

  bool did_work() const { return replicated + removed + moved > 0; }
  std::string to_json() const;
};

struct FinalReport {
  std::size_t cycles = 0;
  CycleReport totals;
  std::vector<std::string> kept;
  std::vector<std::string> pinned;
  std::vector<FileFailure> failures;  // flush-matched files missing on base

  bool ok() const { return failures.empty(); }
  std::string to_json() const;
};

struct PrefetchReport {
  std::vector<std::string> prefetched;
  std::vector<std::string> warnings;
  std::uint64_t bytes = 0;
  std::string to_json() const;
};

struct LifecycleOptions {
  FreeSpaceFn probe = probe_free_space;
  std::chrono::nanoseconds staleness = PathMap::kDefaultStaleness;
  WriterProbe writers = open_write_handles;
  std::uint64_t seed = process_seed();
  // Cap on flush cycles in finalize before giving up on quiescence.
  int max_finalize_cycles = 64;
};

class Lifecycle {
 public:
  Lifecycle(SeaConfig cfg, RuleSet rules, const Session& session,
            LifecycleOptions opts = {});
  ~Lifecycle();

  // One pass over every cache tier. With settled set, files need not have
  // been quiet for a flush interval (the application has exited).
  CycleReport flush_cycle(bool settled = false);
  FinalReport finalize();
  PrefetchReport prefetch();

  std::set<std::string> pins() const;
  FlushJournal& journal() { return journal_; }
  PathMap& pathmap() { return map_; }

 private:
  struct Candidate;
  void process(const Candidate& c, CycleReport& report, std::mutex& mu);
  bool base_matches(const std::string& relative, const FileVersion& v,
                    const std::string& sha256);

  SeaConfig cfg_;
  RuleSet rules_;
  const Session& session_;
  LifecycleOptions opts_;
  PathMap map_;
  FlushJournal journal_;
  std::unique_ptr<Throttle> base_throttle_;
};

}  // namespace sea
