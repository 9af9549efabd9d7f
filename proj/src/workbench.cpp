#include "sea/workbench.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <sys/statvfs.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "json.hpp"
#include "sea/config.hpp"
#include "sea/diag.hpp"
#include "sea/fsutil.hpp"
#include "sea/launcher.hpp"
#include "sea/lifecycle.hpp"
#include "sea/paths.hpp"
#include "sea/rules.hpp"
#include "sea/session.hpp"
#include "sea/throttle.hpp"

namespace sea::bench {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kIoChunk = kThrottleChunk;

[[noreturn]] void fail(const std::string& what) {
  throw std::system_error(errno, std::generic_category(), what);
}

class Fd {
 public:
  explicit Fd(int fd) : fd_(fd) {}
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  int get() const { return fd_; }
  int release() {
    int fd = fd_;
    fd_ = -1;
    return fd;
  }

 private:
  int fd_;
};

void write_all(int fd, const char* data, std::size_t n, const std::string& what) {
  while (n > 0) {
    ssize_t w = ::write(fd, data, n);
    if (w < 0 && errno == EINTR) continue;
    if (w < 0) fail("write " + what);
    data += w;
    n -= std::size_t(w);
  }
}

void fill_chunk(std::vector<unsigned char>& buf, std::uint64_t seed, long index) {
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + std::uint64_t(index));
  std::size_t i = 0;
  for (; i + 8 <= buf.size(); i += 8) {
    std::uint64_t v = rng();
    std::memcpy(buf.data() + i, &v, 8);
  }
  for (std::uint64_t v = rng(); i < buf.size(); ++i, v >>= 8) buf[i] = static_cast<unsigned char>(v);
}

void increment(std::vector<unsigned char>& buf, int times) {
  const auto step = static_cast<unsigned char>(times);
  for (auto& b : buf) b = static_cast<unsigned char>(b + step);
}

std::uint64_t free_bytes(const fs::path& dir) {
  struct statvfs st {};
  if (::statvfs(dir.c_str(), &st) != 0) return 0;
  return std::uint64_t(st.f_bavail) * st.f_frsize;
}

std::string timestamp() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%S", std::localtime(&t));
  return buf;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

json plan_json(const RunPlan& p) {
  return {{"n_iterations", p.n_iterations},
          {"n_chunks", p.n_chunks},
          {"chunk_size", p.chunk_size},
          {"n_processes", p.n_processes},
          {"mode", std::string(to_string(p.mode))},
          {"workdir", p.workdir.string()},
          {"memory_root", p.memory_root.string()},
          {"disk_root", p.disk_root.string()},
          {"base_bandwidth", p.base_bandwidth},
          {"max_file_size", p.max_file_size},
          {"flush_interval_ms", p.flush_interval.count()},
          {"seed", p.seed}};
}

RunPlan plan_from_json(const json& j) {
  RunPlan p;
  p.n_iterations = j.at("n_iterations");
  p.n_chunks = j.at("n_chunks");
  p.chunk_size = j.at("chunk_size");
  p.n_processes = j.at("n_processes");
  p.mode = parse_mode(j.at("mode").get<std::string>()).value_or(Mode::in_memory);
  p.workdir = j.at("workdir").get<std::string>();
  p.memory_root = j.value("memory_root", "");
  p.disk_root = j.value("disk_root", "");
  p.base_bandwidth = j.value("base_bandwidth", std::uint64_t(0));
  p.max_file_size = j.value("max_file_size", std::uint64_t(0));
  p.flush_interval = std::chrono::milliseconds(j.value("flush_interval_ms", 100));
  p.seed = j.value("seed", std::uint64_t(1));
  return p;
}

// Longest tier root containing path.
std::string label_for(const std::string& path, const std::map<std::string, std::string>& tiers) {
  std::string best;
  std::size_t best_len = 0;
  for (const auto& [label, root] : tiers) {
    if (paths::has_prefix(path, root) && root.size() >= best_len) {
      best = label;
      best_len = root.size();
    }
  }
  return best.empty() ? "other" : best;
}

std::string fd_target(int fd) {
  char buf[4096];
  std::string proc = "/proc/self/fd/" + std::to_string(fd);
  ssize_t n = ::readlink(proc.c_str(), buf, sizeof buf);
  return n > 0 ? std::string(buf, std::size_t(n)) : std::string();
}

}  // namespace

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::in_memory: return "in_memory";
    case Mode::flush_all: return "flush_all";
    case Mode::baseline: return "baseline";
  }
  return "?";
}

std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "in_memory") return Mode::in_memory;
  if (s == "flush_all") return Mode::flush_all;
  if (s == "baseline") return Mode::baseline;
  return std::nullopt;
}

std::string chunk_name(long index) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "chunk%04ld.bin", index);
  return buf;
}

std::string output_name(long index, int iteration, int iterations) {
  const int width = std::max(2, int(std::to_string(iterations).size()));
  char buf[64];
  std::snprintf(buf, sizeof buf, "chunk%04ld.iter%0*d.bin", index, width, iteration);
  return buf;
}

Manifest generate_input(long n_chunks, std::uint64_t chunk_size, const fs::path& directory,
                        std::uint64_t seed) {
  if (n_chunks < 0) throw std::invalid_argument("n_chunks must be >= 0");
  if (chunk_size == 0) throw std::invalid_argument("chunk_size must be > 0");
  fs::create_directories(directory);
  const std::uint64_t need = std::uint64_t(n_chunks) * chunk_size;
  if (need > free_bytes(directory))
    throw std::runtime_error("insufficient space in " + directory.string() + " for " +
                             format_size(need));

  Manifest m{seed, chunk_size, {}};
  std::vector<unsigned char> buf(chunk_size);
  for (long i = 0; i < n_chunks; ++i) {
    fill_chunk(buf, seed, i);
    auto path = directory / chunk_name(i);
    Fd out(::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644));
    if (out.get() < 0) fail("open " + path.string());
    write_all(out.get(), reinterpret_cast<const char*>(buf.data()), buf.size(), path.string());
    m.chunks.push_back({chunk_name(i), chunk_size, sha256_hex(buf.data(), buf.size())});
  }

  json j{{"seed", seed}, {"chunk_size", chunk_size}, {"chunks", json::array()}};
  for (const auto& c : m.chunks)
    j["chunks"].push_back({{"name", c.name}, {"size", c.size}, {"sha256", c.sha256}});
  write_text(directory / "manifest.json", j.dump(2));
  return m;
}

Manifest ensure_input(long n_chunks, std::uint64_t chunk_size, const fs::path& directory,
                      std::uint64_t seed) {
  try {
    auto j = json::parse(read_text(directory / "manifest.json"));
    Manifest m{j.at("seed"), j.at("chunk_size"), {}};
    for (const auto& c : j.at("chunks")) m.chunks.push_back({c.at("name"), c.at("size"), c.at("sha256")});
    bool usable = m.seed == seed && m.chunk_size == chunk_size && long(m.chunks.size()) == n_chunks;
    for (const auto& c : m.chunks) {
      std::error_code ec;
      usable = usable && fs::file_size(directory / c.name, ec) == c.size && !ec;
    }
    if (usable) return m;
  } catch (const std::exception&) {
  }
  return generate_input(n_chunks, chunk_size, directory, seed);
}

void RunPlan::validate() const {
  if (n_iterations < 1) throw std::invalid_argument("n_iterations must be >= 1");
  if (n_chunks < 1) throw std::invalid_argument("n_chunks must be >= 1");
  if (chunk_size == 0) throw std::invalid_argument("chunk_size must be > 0");
  if (n_processes < 1) throw std::invalid_argument("n_processes must be >= 1");
  if (workdir.empty()) throw std::invalid_argument("workdir is required");
  if (worker_command.empty()) throw std::invalid_argument("worker_command is required");
}

std::string RunReport::to_json() const {
  json j{{"run_id", run_id},
         {"plan", plan_json(plan)},
         {"makespan_s", makespan_s},
         {"workers_s", workers_s},
         {"finalize_s", finalize_s},
         {"bytes", {{"read", bytes.read}, {"written", bytes.written}}},
         {"flushed_bytes", flushed_bytes},
         {"config_ini", config_ini},
         {"finalize_ok", finalize_ok},
         {"checksums", checksums},
         {"mismatches", mismatches},
         {"base_files", base_files},
         {"cache_files", cache_files},
         {"error", error},
         {"verified", verified()}};
  j["final_report"] = final_report_json.empty() ? json(nullptr) : json::parse(final_report_json);
  return j.dump(2);
}

RunReport RunReport::from_json(std::string_view text) {
  auto j = json::parse(text);
  RunReport r;
  r.run_id = j.at("run_id");
  r.plan = plan_from_json(j.at("plan"));
  r.makespan_s = j.at("makespan_s");
  r.workers_s = j.value("workers_s", 0.0);
  r.finalize_s = j.value("finalize_s", 0.0);
  r.bytes.read = j.at("bytes").at("read").get<std::map<std::string, std::uint64_t>>();
  r.bytes.written = j.at("bytes").at("written").get<std::map<std::string, std::uint64_t>>();
  r.flushed_bytes = j.value("flushed_bytes", std::uint64_t(0));
  r.config_ini = j.value("config_ini", "");
  r.finalize_ok = j.value("finalize_ok", true);
  r.checksums = j.value("checksums", std::map<std::string, std::string>{});
  r.mismatches = j.value("mismatches", std::vector<std::string>{});
  r.base_files = j.value("base_files", std::size_t(0));
  r.cache_files = j.value("cache_files", std::map<std::string, std::size_t>{});
  r.error = j.value("error", "");
  if (j.contains("final_report") && !j["final_report"].is_null())
    r.final_report_json = j["final_report"].dump();
  return r;
}

int worker_main(const fs::path& job_file) {
  try {
    auto job = json::parse(read_text(job_file));
    const fs::path input = job.at("input_dir").get<std::string>();
    const fs::path output = job.at("output_dir").get<std::string>();
    const int iterations = job.at("iterations");
    const auto tiers = job.at("tiers").get<std::map<std::string, std::string>>();
    const auto throttled = job.at("throttle").at("dirs").get<std::vector<std::string>>();
    Throttle throttle(job.at("throttle").at("state").get<std::string>(),
                      job.at("throttle").at("rate").get<std::uint64_t>());

    auto is_throttled = [&](const std::string& concrete) {
      return std::any_of(throttled.begin(), throttled.end(),
                         [&](const auto& d) { return paths::has_prefix(concrete, d); });
    };
    TierBytes stats;
    std::vector<unsigned char> buf;
    for (long index : job.at("chunks").get<std::vector<long>>()) {
      auto in_path = input / chunk_name(index);
      Fd in(::open(in_path.c_str(), O_RDONLY | O_CLOEXEC));
      if (in.get() < 0) fail("open " + in_path.string());
      struct stat st {};
      if (::fstat(in.get(), &st) != 0) fail("stat " + in_path.string());
      const auto where = fd_target(in.get());
      const bool slow_in = is_throttled(where);
      buf.resize(std::size_t(st.st_size));
      std::size_t off = 0;
      while (off < buf.size()) {
        ssize_t n = ::read(in.get(), buf.data() + off, std::min(kIoChunk, buf.size() - off));
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) fail("read " + in_path.string());
        if (slow_in) throttle.consume(std::uint64_t(n));
        off += std::size_t(n);
      }
      stats.read[label_for(where, tiers)] += buf.size();

      for (int it = 1; it <= iterations; ++it) {
        increment(buf, 1);
        auto out_path = output / output_name(index, it, iterations);
        Fd out(::open(out_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644));
        if (out.get() < 0) fail("open " + out_path.string());
        const auto target = fd_target(out.get());
        const bool slow_out = is_throttled(target);
        for (std::size_t pos = 0; pos < buf.size(); pos += kIoChunk) {
          std::size_t n = std::min(kIoChunk, buf.size() - pos);
          write_all(out.get(), reinterpret_cast<const char*>(buf.data() + pos), n,
                    out_path.string());
          if (slow_out) throttle.consume(n);
        }
        if (::close(out.release()) != 0) fail("close " + out_path.string());
        stats.written[label_for(target, tiers)] += buf.size();
      }
    }
    json j{{"read", stats.read}, {"written", stats.written}};
    write_text(job.at("stats").get<std::string>(), j.dump());
    return 0;
  } catch (const std::exception& e) {
    diag::warn(std::string("bench worker: ") + e.what());
    return 1;
  }
}

RunReport run_incrementation(const RunPlan& plan) {
  plan.validate();
  RunReport report;
  report.plan = plan;
  report.run_id = plan.run_id.empty() ? std::string(to_string(plan.mode)) + "-" + timestamp()
                                      : plan.run_id;
  ensure_input(plan.n_chunks, plan.chunk_size, plan.input_dir(), plan.seed);

  const fs::path run_dir = plan.workdir / "runs" / report.run_id;
  fs::remove_all(run_dir);
  const fs::path base = run_dir / "base";
  const fs::path mount = run_dir / "mnt";
  const fs::path mem = plan.memory_root.empty() ? run_dir / "mem"
                                                : plan.memory_root / ("sea-" + report.run_id);
  const fs::path disk = plan.disk_root.empty() ? fs::path()
                                               : plan.disk_root / ("sea-" + report.run_id);
  const bool sea = plan.mode != Mode::baseline;
  fs::create_directories(base / std::string(kSessionDirName));
  if (sea) fs::create_directories(mem);
  if (sea && !disk.empty()) fs::create_directories(disk);

  std::map<std::string, std::string> tiers{
      {"base", fs::absolute(base).string()},
      {"input", fs::absolute(plan.input_dir()).string()}};
  if (sea) tiers["memory"] = fs::absolute(mem).string();
  if (sea && !disk.empty()) tiers["disk"] = fs::absolute(disk).string();

  SeaConfig cfg;
  fs::path config_file = run_dir / "sea.ini";
  if (sea) {
    cfg.mountpoint = fs::absolute(mount);
    cfg.tiers.push_back({"memory", fs::absolute(mem), TierClass::memory, 0});
    if (!disk.empty()) cfg.tiers.push_back({"disk", fs::absolute(disk), TierClass::local_disk, 0});
    cfg.tiers.push_back({"base", fs::absolute(base), TierClass::base, plan.base_bandwidth});
    cfg.max_file_size = plan.max_file_size ? plan.max_file_size : plan.chunk_size;
    cfg.n_processes = unsigned(plan.n_processes);
    cfg.flush_interval = plan.flush_interval;
    cfg.flushlist_path = fs::absolute(run_dir / "flushlist");
    cfg.evictlist_path = fs::absolute(run_dir / "evictlist");
    cfg.prefetchlist_path = fs::absolute(run_dir / "prefetchlist");
    const std::string finals =
        "*" + output_name(0, plan.n_iterations, plan.n_iterations).substr(9) + "\n";
    write_text(cfg.flushlist_path, plan.mode == Mode::in_memory ? finals : "*\n");
    write_text(cfg.evictlist_path, plan.mode == Mode::in_memory ? finals : "");
    write_text(cfg.prefetchlist_path, "");
    report.config_ini = to_ini(cfg);
    write_text(config_file, report.config_ini);
    cfg = load_config_file(config_file);
  }

  const fs::path throttle_state = base / std::string(kSessionDirName) / "throttle";
  std::vector<std::string> jobs;
  for (int w = 0; w < plan.n_processes; ++w) {
    std::vector<long> mine;
    for (long i = w; i < plan.n_chunks; i += plan.n_processes) mine.push_back(i);
    json job{{"input_dir", fs::absolute(plan.input_dir()).string()},
             {"output_dir", fs::absolute(sea ? mount : base).string()},
             {"iterations", plan.n_iterations},
             {"chunks", mine},
             {"tiers", tiers},
             {"throttle",
              {{"rate", plan.base_bandwidth},
               {"state", fs::absolute(throttle_state).string()},
               {"dirs", {tiers["base"], tiers["input"]}}}},
             {"stats", fs::absolute(run_dir / ("worker" + std::to_string(w) + ".stats.json")).string()}};
    auto job_file = run_dir / ("worker" + std::to_string(w) + ".json");
    write_text(job_file, job.dump(2));
    jobs.push_back(fs::absolute(job_file).string());
  }

  std::map<std::string, std::string> env;
  std::optional<Session> session;
  std::optional<Lease> lease;
  std::optional<FlusherProcess> flusher;
  RuleSet rules;
  if (sea) {
    env = preload_environment(
        plan.preload_library.empty() ? find_preload_library() : plan.preload_library,
        config_file);
    session.emplace(cfg, "bench");
    lease.emplace(session->lock_file());
    rules = load_rules(cfg);
    flusher.emplace(cfg, rules, *session);
  }

  auto start = std::chrono::steady_clock::now();
  std::vector<pid_t> pids;
  for (const auto& job : jobs) {
    auto argv = plan.worker_command;
    argv.push_back(job);
    pids.push_back(spawn(argv, env));
  }
  for (std::size_t w = 0; w < pids.size(); ++w) {
    int status = wait_status(pids[w]);
    if (status != 0 && report.error.empty())
      report.error = "worker " + std::to_string(w) + " exited with status " + std::to_string(status);
  }
  report.workers_s = seconds_since(start);

  if (sea) {
    flusher->stop();
    auto fin = std::chrono::steady_clock::now();
    Lifecycle lifecycle(cfg, rules, *session);
    auto final_report = lifecycle.finalize();
    report.finalize_s = seconds_since(fin);
    report.final_report_json = final_report.to_json();
    report.finalize_ok = final_report.ok();
    std::ifstream lines(session->reports_file());
    for (std::string line; std::getline(lines, line);) {
      auto j = json::parse(line, nullptr, false);
      if (!j.is_discarded() && j.value("type", "") == "cycle")
        report.flushed_bytes += j.value("bytes", std::uint64_t(0));
    }
  }
  report.makespan_s = seconds_since(start);

  for (int w = 0; w < plan.n_processes; ++w) {
    auto stats_file = run_dir / ("worker" + std::to_string(w) + ".stats.json");
    if (!fs::exists(stats_file)) continue;
    auto j = json::parse(read_text(stats_file));
    for (auto& [k, v] : j.at("read").items()) report.bytes.read[k] += v.get<std::uint64_t>();
    for (auto& [k, v] : j.at("written").items()) report.bytes.written[k] += v.get<std::uint64_t>();
  }

  std::vector<unsigned char> buf;
  for (long i = 0; i < plan.n_chunks; ++i) {
    auto in_path = plan.input_dir() / chunk_name(i);
    buf.resize(plan.chunk_size);
    std::ifstream in(in_path, std::ios::binary);
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
    increment(buf, plan.n_iterations);
    const auto expected = sha256_hex(buf.data(), buf.size());
    const auto name = output_name(i, plan.n_iterations, plan.n_iterations);
    const auto path = (base / name).string();
    if (!regular_file_version(path)) {
      report.mismatches.push_back(name + ": missing on base");
      continue;
    }
    auto actual = sha256_file(path);
    report.checksums[name] = actual;
    if (actual != expected) report.mismatches.push_back(name + ": checksum differs");
  }
  report.base_files = walk_files(base, {std::string(kSessionDirName)}).size();
  if (sea) {
    report.cache_files["memory"] = walk_files(mem).size();
    if (!disk.empty()) report.cache_files["disk"] = walk_files(disk).size();
  }

  lease.reset();
  if (!plan.keep_files) {
    std::error_code ec;
    if (sea) fs::remove_all(mem, ec);
    if (!disk.empty()) fs::remove_all(disk, ec);
    fs::remove_all(base, ec);
  }
  fs::create_directories(plan.workdir / "reports");
  write_text(plan.workdir / "reports" / (report.run_id + ".json"), report.to_json());
  return report;
}

sea::model::ClusterSpec desk_cluster(const RunPlan& plan, double cache_read_mibps,
                                     double cache_write_mibps) {
  constexpr double MiB = 1024.0 * 1024.0;
  sea::model::ClusterSpec c;
  c.nodes = 1;
  c.storage_nodes = 1;
  c.processes = plan.n_processes;
  c.storage_disks = 1;
  c.local_disks = plan.disk_root.empty() ? 0 : 1;
  const double base = plan.base_bandwidth ? double(plan.base_bandwidth) / MiB : cache_write_mibps;
  c.network_bw = std::max({base, cache_read_mibps, cache_write_mibps}) * 1000;
  c.pfs_disk_read_bw = plan.base_bandwidth ? base : cache_read_mibps;
  c.pfs_disk_write_bw = base;
  c.local_disk_read_bw = cache_read_mibps;
  c.local_disk_write_bw = cache_write_mibps;
  c.cache_read_bw = cache_read_mibps;
  c.cache_write_bw = cache_write_mibps;
  const fs::path mem = plan.memory_root.empty() ? plan.workdir : plan.memory_root;
  c.tmpfs_space = double(free_bytes(mem)) / MiB;
  c.local_disk_space = plan.disk_root.empty() ? 0 : double(free_bytes(plan.disk_root)) / MiB;
  c.file_size = double(plan.max_file_size ? plan.max_file_size : plan.chunk_size) / MiB;
  return c;
}

Verdict compare_with_model(const RunReport& report, const sea::model::ClusterSpec& cluster) {
  constexpr double MiB = 1024.0 * 1024.0;
  const auto& p = report.plan;
  auto w = sea::model::derive_workload(p.n_iterations, p.n_chunks, double(p.chunk_size) / MiB);
  const bool sea = p.mode != Mode::baseline;
  auto bounds = sea ? sea::model::sea_bounds(w, cluster) : sea::model::lustre_bounds(w, cluster);
  Verdict v;
  v.system = sea ? "sea" : "lustre";
  v.lower = bounds.lower.seconds;
  v.upper = bounds.upper.seconds;
  v.measured = report.makespan_s;
  if (v.measured > v.upper) {
    v.verdict = "above";
    v.gap = v.measured - v.upper;
    if (v.upper > 0) v.ratio = v.measured / v.upper;
  } else if (v.measured < v.lower) {
    v.verdict = "below";
    v.gap = v.lower - v.measured;
    if (v.lower > 0) v.ratio = v.measured / v.lower;
  } else {
    v.verdict = "within";
  }
  return v;
}

std::string verdict_csv(const std::vector<Verdict>& rows) {
  std::ostringstream out;
  out << "system,lower_s,upper_s,measured_s,verdict,gap_s,ratio\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%s,%.6f,", r.system.c_str(), r.lower,
                  r.upper, r.measured, r.verdict.c_str(), r.gap);
    out << buf;
    if (r.ratio) {
      std::snprintf(buf, sizeof buf, "%.6f", *r.ratio);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace sea::bench
