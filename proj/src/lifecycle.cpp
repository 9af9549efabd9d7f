#include "sea/lifecycle.hpp"

#include <time.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "sea/diag.hpp"

namespace sea {
namespace {

std::int64_t realtime_ns() {
  struct timespec ts {};
  ::clock_gettime(CLOCK_REALTIME, &ts);
  return std::int64_t(ts.tv_sec) * 1'000'000'000 + ts.tv_nsec;
}

nlohmann::json failures_json(const std::vector<FileFailure>& fs) {
  auto out = nlohmann::json::array();
  for (const auto& f : fs) out.push_back({{"path", f.path}, {"error", f.error}});
  return out;
}

nlohmann::json cycle_json(const CycleReport& r) {
  return {{"replicated", r.replicated}, {"copied", r.copied},
          {"removed", r.removed},       {"moved", r.moved},
          {"skipped_unstable", r.skipped_unstable},
          {"bytes", r.bytes},           {"failures", failures_json(r.failures)},
          {"duplicates", r.duplicates}, {"kept", r.kept}};
}

void accumulate(CycleReport& into, const CycleReport& r) {
  into.replicated += r.replicated;
  into.copied += r.copied;
  into.removed += r.removed;
  into.moved += r.moved;
  into.skipped_unstable += r.skipped_unstable;
  into.bytes += r.bytes;
  into.failures.insert(into.failures.end(), r.failures.begin(), r.failures.end());
}

}  // namespace

std::string CycleReport::to_json() const {
  auto j = cycle_json(*this);
  j["type"] = "cycle";
  return j.dump();
}

std::string FinalReport::to_json() const {
  nlohmann::json j{{"type", "finalize"},
                   {"cycles", cycles},
                   {"totals", cycle_json(totals)},
                   {"kept", kept},
                   {"pinned", pinned},
                   {"failures", failures_json(failures)},
                   {"ok", ok()}};
  return j.dump();
}

std::string PrefetchReport::to_json() const {
  nlohmann::json j{{"type", "prefetch"},
                   {"prefetched", prefetched},
                   {"warnings", warnings},
                   {"bytes", bytes}};
  return j.dump();
}

struct Lifecycle::Candidate {
  std::string relative;
  std::string path;
  FileVersion version;
  LifecycleMode mode;
};

Lifecycle::Lifecycle(SeaConfig cfg, RuleSet rules, const Session& session,
                     LifecycleOptions opts)
    : cfg_(std::move(cfg)),
      rules_(std::move(rules)),
      session_(session),
      opts_(std::move(opts)),
      map_(cfg_, opts_.probe, opts_.staleness, opts_.seed),
      journal_(session.journal_file()) {
  if (cfg_.base().bandwidth_limit > 0)
    base_throttle_ =
        std::make_unique<Throttle>(session.throttle_file(), cfg_.base().bandwidth_limit);
}

Lifecycle::~Lifecycle() = default;

std::set<std::string> Lifecycle::pins() const {
  std::set<std::string> out;
  std::ifstream in(session_.pins_file());
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.insert(line);
  return out;
}

bool Lifecycle::base_matches(const std::string& relative, const FileVersion& v,
                             const std::string& sha256) {
  auto base_path = map_.concrete(cfg_.base_index(), relative);
  auto base = regular_file_version(base_path);
  if (!base || base->size != v.size || sha256.empty()) return false;
  auto cached = map_.locate_all(relative);
  if (cached.empty() || cached.front().tier == cfg_.base_index()) return false;
  return sha256_file(cached.front().path) == sha256 &&
         sha256_file(base_path, base_throttle_.get()) == sha256;
}

void Lifecycle::process(const Candidate& c, CycleReport& report, std::mutex& mu) {
  const std::size_t base = cfg_.base_index();
  auto entry = journal_.get(c.relative, c.version);

  auto replicate = [&] {
    if (entry.state < FlushState::flushing)
      journal_.record(c.relative, c.version, FlushState::flushing);
    if (!map_.ensure_parent(base, c.relative))
      throw std::runtime_error("cannot create parent directory on base");
    auto dst = map_.concrete(base, c.relative);
    auto result = replicate_file(c.path, dst, nullptr, base_throttle_.get());
    // A write racing the copy leaves the key in flushing; the new version
    // is picked up next cycle.
    if (regular_file_version(c.path) != c.version) return false;
    journal_.record(c.relative, c.version, FlushState::flushed, result.sha256);
    std::lock_guard lock(mu);
    ++report.replicated;
    report.bytes += result.bytes;
    return true;
  };

  auto evict = [&](bool direct) {
    if (regular_file_version(c.path) != c.version) return false;
    if (::unlink(c.path.c_str()) != 0)
      throw std::system_error(errno, std::generic_category(), "unlink " + c.path);
    journal_.record(c.relative, c.version, FlushState::evicted, {}, direct);
    return true;
  };

  switch (c.mode) {
    case LifecycleMode::keep:
      break;
    case LifecycleMode::copy:
      if (entry.state >= FlushState::flushed) break;
      if (replicate()) {
        std::lock_guard lock(mu);
        ++report.copied;
      }
      break;
    case LifecycleMode::remove:
      if (evict(true)) {
        std::lock_guard lock(mu);
        ++report.removed;
      }
      break;
    case LifecycleMode::move:
      if (entry.state < FlushState::flushed) {
        // Evicted on a later cycle, so readers racing the move still find
        // the cache copy for one more interval.
        replicate();
        break;
      }
      if (!base_matches(c.relative, c.version, entry.sha256)) {
        diag::warn("replica of " + c.relative + " does not match, copying again");
        replicate();
        break;
      }
      if (evict(false)) {
        std::lock_guard lock(mu);
        ++report.moved;
      }
      break;
  }
}

CycleReport Lifecycle::flush_cycle(bool settled) {
  CycleReport report;
  const auto pinned = pins();
  const auto writers = opts_.writers();
  const std::int64_t now = realtime_ns();
  const std::int64_t quiet =
      std::chrono::duration_cast<std::chrono::nanoseconds>(cfg_.flush_interval).count();

  std::set<std::string> seen;
  std::vector<Candidate> work;
  for (std::size_t tier = 0; tier < cfg_.base_index(); ++tier) {
    for (auto& f : walk_files(cfg_.tiers[tier].root)) {
      if (!seen.insert(f.relative).second) {
        report.duplicates.push_back(f.relative);
        continue;
      }
      auto mode = rules_.classify(f.relative);
      if (mode == LifecycleMode::keep) {
        report.kept.push_back(f.relative);
        continue;
      }
      if (pinned.count(f.relative)) continue;
      auto v = regular_file_version(f.path);
      if (!v) continue;
      if (writers.count(f.path) || (!settled && now - v->mtime_ns < quiet)) {
        ++report.skipped_unstable;
        continue;
      }
      work.push_back({f.relative, f.path, *v, mode});
    }
  }
  std::stable_sort(work.begin(), work.end(), [](const auto& a, const auto& b) {
    return a.version.mtime_ns < b.version.mtime_ns;
  });

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t i; (i = next++) < work.size();) {
      try {
        process(work[i], report, mu);
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        report.failures.push_back({work[i].relative, e.what()});
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(cfg_.flush_workers, unsigned(work.size())));
  if (n == 1) {
    run();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(run);
  }

  for (const auto& f : report.failures) diag::warn("flush " + f.path + ": " + f.error);
  if (report.did_work() || !report.failures.empty()) session_.append_report(report.to_json());
  return report;
}

FinalReport Lifecycle::finalize() {
  FinalReport out;
  while (out.cycles < std::size_t(opts_.max_finalize_cycles)) {
    auto r = flush_cycle(true);
    ++out.cycles;
    accumulate(out.totals, r);
    if (!r.did_work()) break;
  }

  const std::size_t base = cfg_.base_index();
  // A flusher killed mid-copy leaves its temporary behind.
  for (const auto& [relative, state] : journal_.latest()) {
    if (state != FlushState::flushing) continue;
    auto tmp = replica_temp_name(map_.concrete(base, relative));
    if (::unlink(tmp.c_str()) == 0) diag::debug(1, "removed stale " + tmp);
  }

  const auto pinned = pins();
  std::set<std::string> seen;
  for (std::size_t tier = 0; tier < base; ++tier) {
    for (auto& f : walk_files(cfg_.tiers[tier].root)) {
      if (!seen.insert(f.relative).second) continue;
      auto mode = rules_.classify(f.relative);
      if (pinned.count(f.relative)) {
        out.pinned.push_back(f.relative);
        continue;
      }
      if (mode == LifecycleMode::keep) {
        out.kept.push_back(f.relative);
        continue;
      }
      if (flushes(mode)) {
        auto cached = regular_file_version(f.path);
        auto stored = regular_file_version(map_.concrete(base, f.relative));
        if (!stored || stored != cached) {
          out.failures.push_back({f.relative, "not materialized on base"});
          continue;
        }
      }
      if (evicts(mode)) out.failures.push_back({f.relative, "still in cache"});
    }
  }
  for (const auto& f : out.failures) diag::warn("finalize " + f.path + ": " + f.error);
  session_.append_report(out.to_json());
  return out;
}

PrefetchReport Lifecycle::prefetch() {
  PrefetchReport out;
  if (rules_.prefetch.empty()) return out;
  const std::size_t base = cfg_.base_index();
  auto files = walk_files(cfg_.base().root, {std::string(kSessionDirName)});
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.relative < b.relative; });

  std::ofstream pins(session_.pins_file(), std::ios::app);
  for (const auto& f : files) {
    if (!rules_.prefetch.matches(f.relative)) continue;
    if (map_.locate_all(f.relative).front().tier != base) continue;
    std::size_t tier = map_.select_tier();
    if (tier == base) {
      out.warnings.push_back("no cache space for " + f.relative);
      continue;
    }
    try {
      if (!map_.ensure_parent(tier, f.relative))
        throw std::runtime_error("cannot create parent directory");
      auto r = replicate_file(f.path, map_.concrete(tier, f.relative), base_throttle_.get());
      out.bytes += r.bytes;
      out.prefetched.push_back(f.relative);
      pins << f.relative << '\n' << std::flush;
    } catch (const std::exception& e) {
      out.warnings.push_back("prefetch " + f.relative + ": " + e.what());
    }
  }
  for (const auto& w : out.warnings) diag::warn(w);
  session_.append_report(out.to_json());
  return out;
}

}  // namespace sea
