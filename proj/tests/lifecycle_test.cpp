#include "sea/lifecycle.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include <chrono>
#include <fstream>
#include <random>
#include <thread>

#include "test_util.hpp"

namespace sea {
namespace {

namespace fs = std::filesystem;
using testing::read_file;
using testing::write_file;

constexpr std::uint64_t MiB = 1 << 20;

TEST(Rules, ModeTableIsExhaustive) {
  EXPECT_EQ(mode_for(true, false), LifecycleMode::copy);
  EXPECT_EQ(mode_for(false, true), LifecycleMode::remove);
  EXPECT_EQ(mode_for(true, true), LifecycleMode::move);
  EXPECT_EQ(mode_for(false, false), LifecycleMode::keep);
}

TEST(Rules, ParseAndMatch) {
  auto list = PatternList::parse("# outputs\n\n  *.iter09.bin  \n/logs/*.txt\n#*.tmp\n");
  ASSERT_EQ(list.patterns().size(), 2u);
  EXPECT_EQ(list.patterns()[1], "logs/*.txt");
  EXPECT_TRUE(list.matches("out/chunk0001.iter09.bin"));
  EXPECT_TRUE(list.matches("/out/chunk0001.iter09.bin"));
  EXPECT_TRUE(list.matches("logs/a.txt"));
  EXPECT_FALSE(list.matches("x.tmp"));
  EXPECT_FALSE(list.matches("chunk0001.iter08.bin"));
  EXPECT_TRUE(PatternList::parse("").empty());
  EXPECT_TRUE(PatternList::load("/nonexistent/.sea_flushlist").empty());

  RuleSet rules{PatternList::parse("*.out\n*.both\n"), PatternList::parse("*.tmp\n*.both\n"), {}};
  EXPECT_EQ(rules.classify("a/b.out"), LifecycleMode::copy);
  EXPECT_EQ(rules.classify("a/b.tmp"), LifecycleMode::remove);
  EXPECT_EQ(rules.classify("b.both"), LifecycleMode::move);
  EXPECT_EQ(rules.classify("b.in"), LifecycleMode::keep);
}

TEST(FsUtil, Sha256KnownVector) {
  testing::TempDir dir;
  write_file(dir / "abc", "abc");
  EXPECT_EQ(sha256_file((dir / "abc").string()),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(FsUtil, ReplicatePreservesBytesModeAndMtime) {
  testing::TempDir dir;
  std::string data(3 * MiB + 17, '\0');
  std::mt19937 rng(7);
  for (auto& c : data) c = char(rng());
  auto src = (dir / "src.bin").string();
  auto dst = (dir / "dst.bin").string();
  write_file(src, data);
  ::chmod(src.c_str(), 0640);
  struct timespec t[2] = {{1000, 5}, {2000, 123456789}};
  ::utimensat(AT_FDCWD, src.c_str(), t, 0);

  auto r = replicate_file(src, dst);
  EXPECT_EQ(r.bytes, data.size());
  EXPECT_EQ(r.sha256, sha256_file(src));
  EXPECT_EQ(read_file(dst), data);
  struct stat st {};
  ASSERT_EQ(::stat(dst.c_str(), &st), 0);
  EXPECT_EQ(st.st_mode & 07777, 0640u);
  EXPECT_EQ(regular_file_version(dst), regular_file_version(src));
  EXPECT_FALSE(fs::exists(replica_temp_name(dst)));
  EXPECT_THROW(replicate_file((dir / "missing").string(), dst), std::system_error);
}

TEST(FsUtil, WalkSkipsTopLevelNames) {
  testing::TempDir dir;
  write_file(dir / "a/b/c.txt", "1");
  write_file(dir / "d.txt", "2");
  write_file(dir / ".sea_session/x/journal.jsonl", "3");
  write_file(dir / "a/.sea_session", "4");
  auto files = walk_files(dir.path(), {".sea_session"});
  std::set<std::string> rel;
  for (auto& f : files) rel.insert(f.relative);
  EXPECT_EQ(rel, (std::set<std::string>{"a/b/c.txt", "d.txt", "a/.sea_session"}));
}

TEST(FsUtil, WriterProbeSeesOpenWriteHandleInChild) {
  testing::TempDir dir;
  auto path = (dir / "w.bin").string();
  int pipefd[2];
  ASSERT_EQ(::pipe(pipefd), 0);
  pid_t pid = ::fork();
  if (pid == 0) {
    int fd = ::open(path.c_str(), O_WRONLY | O_CREAT, 0644);
    char c = 'x';
    [[maybe_unused]] auto n = ::write(pipefd[1], &c, 1);
    ::pause();
    ::close(fd);
    ::_exit(0);
  }
  char c;
  ASSERT_EQ(::read(pipefd[0], &c, 1), 1);
  EXPECT_TRUE(open_write_handles().count(path));
  ::kill(pid, SIGKILL);
  ::waitpid(pid, nullptr, 0);
  EXPECT_FALSE(open_write_handles().count(path));
  ::close(pipefd[0]);
  ::close(pipefd[1]);
}

TEST(Throttle, SharedRateAcrossInstances) {
  testing::TempDir dir;
  auto state = dir / "throttle";
  const auto start = std::chrono::steady_clock::now();
  {
    std::jthread a([&] {
      Throttle t(state, 40 * MiB);
      for (int i = 0; i < 4; ++i) t.consume(MiB);
    });
    std::jthread b([&] {
      Throttle t(state, 40 * MiB);
      for (int i = 0; i < 4; ++i) t.consume(MiB);
    });
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  // 8 MiB through one 40 MiB/s device.
  EXPECT_GE(secs, 0.19);
  EXPECT_LT(secs, 2.0);

  Throttle unlimited(dir / "none", 0);
  unlimited.consume(1ull << 40);
  EXPECT_FALSE(fs::exists(dir / "none"));
}

TEST(Journal, MonotoneAndReplayed) {
  testing::TempDir dir;
  FileVersion v{10, 99};
  {
    FlushJournal j(dir / "journal.jsonl");
    EXPECT_EQ(j.get("a", v).state, FlushState::dirty);
    j.record("a", v, FlushState::flushing);
    j.record("a", v, FlushState::flushed, "abcd");
    EXPECT_THROW(j.record("a", v, FlushState::flushing), std::logic_error);
    EXPECT_THROW(j.record("b", v, FlushState::evicted), std::logic_error);
    j.record("b", v, FlushState::evicted, {}, true);
    // A new version starts over.
    FileVersion v2{11, 100};
    EXPECT_EQ(j.get("a", v2).state, FlushState::dirty);
  }
  {
    std::ofstream torn(dir / "journal.jsonl", std::ios::app);
    torn << "{\"path\":\"a\",\"size\":10,\"mti";
  }
  FlushJournal j(dir / "journal.jsonl");
  EXPECT_EQ(j.skipped_lines(), 1u);
  EXPECT_EQ(j.get("a", v).state, FlushState::flushed);
  EXPECT_EQ(j.get("a", v).sha256, "abcd");
  EXPECT_EQ(j.get("b", v).state, FlushState::evicted);
  EXPECT_EQ(j.latest().at("a"), FlushState::flushed);
  j.record("a", v, FlushState::evicted);
  EXPECT_EQ(j.get("a", v).state, FlushState::evicted);
}

TEST(Lease, SecondHolderConflicts) {
  testing::TempDir dir;
  auto lock = dir / "lock";
  {
    Lease first(lock);
    EXPECT_THROW(Lease second(lock), LeaseConflict);
    pid_t pid = ::fork();
    if (pid == 0) {
      try {
        Lease child(lock);
      } catch (const LeaseConflict&) {
        ::_exit(3);
      }
      ::_exit(0);
    }
    int status = 0;
    ::waitpid(pid, &status, 0);
    EXPECT_EQ(WEXITSTATUS(status), 3);
  }
  EXPECT_NO_THROW(Lease again(lock));
}

class LifecycleFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    cfg_.mountpoint = "/sea-virtual-mount";
    cfg_.max_file_size = MiB;
    cfg_.n_processes = 2;
    cfg_.flush_interval = std::chrono::milliseconds(0);
    for (const char* name : {"mem", "disk", "base"}) fs::create_directories(dir_ / name);
    cfg_.tiers = {{"mem", dir_ / "mem", TierClass::memory, 0},
                  {"disk", dir_ / "disk", TierClass::local_disk, 0},
                  {"base", dir_ / "base", TierClass::base, 0}};
    session_ = std::make_unique<Session>(cfg_, "test");
  }

  std::unique_ptr<Lifecycle> make(RuleSet rules, std::vector<std::uint64_t> free = {
                                                     1ull << 40, 1ull << 40, 1ull << 40}) {
    LifecycleOptions opts;
    auto roots = cfg_.tiers;
    opts.probe = [roots, free](const fs::path& root) {
      for (std::size_t i = 0; i < roots.size(); ++i)
        if (roots[i].root == root) return free[i];
      return std::uint64_t{0};
    };
    opts.staleness = std::chrono::hours(1);
    opts.writers = [this] { return writers_; };
    opts.seed = 1;
    return std::make_unique<Lifecycle>(cfg_, std::move(rules), *session_, opts);
  }

  static RuleSet rules(const char* flush, const char* evict, const char* prefetch = "") {
    return {PatternList::parse(flush), PatternList::parse(evict),
            PatternList::parse(prefetch)};
  }

  fs::path mem(const std::string& rel) const { return dir_ / "mem" / rel; }
  fs::path base(const std::string& rel) const { return dir_ / "base" / rel; }

  testing::TempDir dir_;
  SeaConfig cfg_;
  std::unique_ptr<Session> session_;
  std::set<std::string> writers_;
};

TEST_F(LifecycleFixture, MoveReplicatesThenEvictsAfterGrace) {
  for (int i = 0; i < 3; ++i) write_file(mem("out/f" + std::to_string(i)), "data" + std::to_string(i));
  auto lc = make(rules("out/*", "out/*"));
  auto r1 = lc->flush_cycle();
  EXPECT_EQ(r1.replicated, 3u);
  EXPECT_EQ(r1.moved, 0u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(read_file(base("out/f" + std::to_string(i))), "data" + std::to_string(i));
    EXPECT_TRUE(fs::exists(mem("out/f" + std::to_string(i))));
  }
  auto r2 = lc->flush_cycle();
  EXPECT_EQ(r2.moved, 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_FALSE(fs::exists(mem("out/f" + std::to_string(i))));
    EXPECT_EQ(lc->journal().latest().at("out/f" + std::to_string(i)), FlushState::evicted);
  }
  EXPECT_FALSE(lc->flush_cycle().did_work());
}

TEST_F(LifecycleFixture, CopyIsIdempotentAndReflushesChanges) {
  write_file(mem("a.out"), "one");
  write_file(dir_ / "disk" / "b.out", "two");
  auto lc = make(rules("*.out", ""));
  auto r1 = lc->flush_cycle();
  EXPECT_EQ(r1.copied, 2u);
  EXPECT_EQ(read_file(base("b.out")), "two");
  auto before = regular_file_version(base("a.out").string());

  auto r2 = lc->flush_cycle();
  EXPECT_FALSE(r2.did_work());
  EXPECT_EQ(regular_file_version(base("a.out").string()), before);
  EXPECT_TRUE(fs::exists(mem("a.out")));

  write_file(mem("a.out"), "one, revised");
  EXPECT_EQ(lc->flush_cycle().copied, 1u);
  EXPECT_EQ(read_file(base("a.out")), "one, revised");
}

TEST_F(LifecycleFixture, RemoveKeepAndUnstable) {
  write_file(mem("scratch.tmp"), "x");
  write_file(mem("notes.txt"), "y");
  writers_.insert(mem("scratch.tmp").string());
  auto lc = make(rules("", "*.tmp"));
  auto r1 = lc->flush_cycle();
  EXPECT_EQ(r1.skipped_unstable, 1u);
  EXPECT_EQ(r1.kept, std::vector<std::string>{"notes.txt"});
  EXPECT_TRUE(fs::exists(mem("scratch.tmp")));

  writers_.clear();
  auto r2 = lc->flush_cycle();
  EXPECT_EQ(r2.removed, 1u);
  EXPECT_FALSE(fs::exists(mem("scratch.tmp")));
  EXPECT_FALSE(fs::exists(base("scratch.tmp")));
  EXPECT_TRUE(fs::exists(mem("notes.txt")));
}

TEST_F(LifecycleFixture, RecentlyModifiedFilesWaitForQuietInterval) {
  cfg_.flush_interval = std::chrono::hours(1);
  write_file(mem("a.out"), "x");
  auto lc = make(rules("*.out", ""));
  EXPECT_EQ(lc->flush_cycle().skipped_unstable, 1u);
  EXPECT_EQ(lc->flush_cycle(true).copied, 1u);
}

TEST_F(LifecycleFixture, TamperedReplicaBlocksEviction) {
  write_file(mem("m.bin"), "payload");
  auto lc = make(rules("*", "*"));
  lc->flush_cycle();
  write_file(base("m.bin"), "PAYLOAD");
  auto r = lc->flush_cycle();
  EXPECT_EQ(r.moved, 0u);
  EXPECT_TRUE(fs::exists(mem("m.bin")));
  EXPECT_EQ(read_file(base("m.bin")), "payload");
  EXPECT_EQ(lc->flush_cycle().moved, 1u);
}

TEST_F(LifecycleFixture, FinalizeInMemoryAndFlushAll) {
  for (int c = 0; c < 4; ++c)
    for (int it = 1; it <= 3; ++it)
      write_file(mem("out/c" + std::to_string(c) + ".iter" + std::to_string(it)), "v");
  {
    auto lc = make(rules("out/*.iter3", "out/*.iter3"));
    auto rep = lc->finalize();
    EXPECT_TRUE(rep.ok());
    EXPECT_EQ(rep.totals.moved, 4u);
    EXPECT_EQ(rep.kept.size(), 8u);
    EXPECT_EQ(walk_files(dir_ / "base", {".sea_session"}).size(), 4u);
    EXPECT_EQ(walk_files(dir_ / "mem").size(), 8u);
  }
  {
    auto lc = make(rules("*", ""));
    auto rep = lc->finalize();
    EXPECT_TRUE(rep.ok());
    EXPECT_EQ(walk_files(dir_ / "base", {".sea_session"}).size(), 12u);
  }
}

TEST_F(LifecycleFixture, FinalizeEmptyCache) {
  auto lc = make(rules("*", "*"));
  auto rep = lc->finalize();
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(rep.cycles, 1u);
  EXPECT_FALSE(rep.totals.did_work());
}

TEST_F(LifecycleFixture, FinalizeReportsUnflushableFile) {
  write_file(mem("blocked/f.out"), "x");
  write_file(base("blocked"), "a file where a directory should be");
  auto lc = make(rules("*.out", ""));
  auto rep = lc->finalize();
  EXPECT_FALSE(rep.ok());
  ASSERT_EQ(rep.failures.size(), 1u);
  EXPECT_EQ(rep.failures[0].path, "blocked/f.out");
}

TEST_F(LifecycleFixture, PrefetchPinsUpToCapacity) {
  for (int i = 0; i < 10; ++i) write_file(base("in/c" + std::to_string(i)), "input");
  write_file(base("other"), "z");
  // Room for 4 files above the n_processes x max_file_size reserve.
  auto lc = make(rules("", "*", "in/*"), {(2 + 3) * MiB, 0, 1ull << 40});
  auto rep = lc->prefetch();
  EXPECT_EQ(rep.prefetched.size(), 4u);
  EXPECT_EQ(rep.warnings.size(), 6u);
  EXPECT_EQ(lc->pins().size(), 4u);
  for (const auto& rel : rep.prefetched) EXPECT_EQ(read_file(mem(rel)), "input");

  // Pinned inputs survive an evict-everything rule.
  lc->finalize();
  for (const auto& rel : rep.prefetched) EXPECT_TRUE(fs::exists(mem(rel)));
}

TEST_F(LifecycleFixture, PrefetchNoMatch) {
  write_file(base("x"), "1");
  auto lc = make(rules("", "", "nothing/*"));
  auto rep = lc->prefetch();
  EXPECT_TRUE(rep.prefetched.empty());
  EXPECT_TRUE(rep.warnings.empty());
}

TEST_F(LifecycleFixture, ParallelWorkers) {
  cfg_.flush_workers = 4;
  for (int i = 0; i < 40; ++i) write_file(mem("f" + std::to_string(i)), std::string(1000 + i, 'a'));
  auto lc = make(rules("*", "*"));
  auto rep = lc->finalize();
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(rep.totals.moved, 40u);
  EXPECT_TRUE(walk_files(dir_ / "mem").empty());
}

// Random writes, rewrites and deletions interleaved with cycles: a file
// disappears from the caches only when it is remove-matched, or when base
// holds exactly its last cached content.
TEST_F(LifecycleFixture, SafetyUnderRandomActivity) {
  std::mt19937 rng(11);
  auto lc = make(rules("*.c\n*.m\n", "*.r\n*.m\n"));
  std::map<std::string, std::string> cached;
  const char* exts[] = {".c", ".m", ".r", ".k"};
  for (int step = 0; step < 300; ++step) {
    for (int k = 0; k < 3; ++k) {
      std::string rel = "d" + std::to_string(rng() % 3) + "/f" + std::to_string(rng() % 8) +
                        exts[rng() % 4];
      std::string data = std::to_string(rng());
      auto tier = (rng() % 2) ? "mem" : "disk";
      // One cache copy per path keeps the read view unambiguous.
      auto other = dir_ / ((std::string(tier) == "mem") ? "disk" : "mem") / rel;
      if (fs::exists(other)) continue;
      write_file(dir_ / tier / rel, data);
      cached[rel] = data;
    }
    lc->flush_cycle(true);
    for (auto it = cached.begin(); it != cached.end();) {
      const auto& [rel, data] = *it;
      bool present = fs::exists(mem(rel)) || fs::exists(dir_ / "disk" / rel);
      if (!present) {
        auto mode = RuleSet{PatternList::parse("*.c\n*.m\n"), PatternList::parse("*.r\n*.m\n"), {}}
                        .classify(rel);
        ASSERT_TRUE(mode == LifecycleMode::remove || mode == LifecycleMode::move) << rel;
        if (mode == LifecycleMode::move) {
          ASSERT_EQ(read_file(base(rel)), data) << rel;
        }
        it = cached.erase(it);
      } else {
        ++it;
      }
    }
  }
}

}  // namespace
}  // namespace sea
