#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "sea/config.hpp"
#include "sea/diag.hpp"
#include "sea/launcher.hpp"
#include "sea/lifecycle.hpp"
#include "sea/perfmodel.hpp"
#include "sea/session.hpp"
#include "sea/workbench.hpp"

namespace fs = std::filesystem;

namespace {

fs::path self_exe() {
  std::error_code ec;
  auto p = fs::read_symlink("/proc/self/exe", ec);
  return ec ? fs::path("sea") : p;
}

struct Managed {
  sea::SeaConfig cfg;
  sea::RuleSet rules;
  std::unique_ptr<sea::Session> session;
  std::unique_ptr<sea::Lease> lease;
};

Managed open_session(const fs::path& config, const std::string& run_id) {
  Managed m;
  m.cfg = sea::load_config_file(config);
  for (const auto& w : sea::validate_runtime(m.cfg)) sea::diag::warn(w.message);
  m.rules = sea::load_rules(m.cfg);
  m.session = std::make_unique<sea::Session>(m.cfg, run_id.empty() ? sea::default_run_id() : run_id);
  m.lease = std::make_unique<sea::Lease>(m.session->lock_file());
  return m;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sea: transparent data placement across storage tiers"};
  app.require_subcommand(1);
  std::string config = sea::default_config_path().string();
  std::string run_id;

  auto* run = app.add_subcommand("run", "Run a command with its I/O redirected through Sea");
  std::vector<std::string> command;
  run->add_option("--config,-c", config, "Configuration file")->capture_default_str();
  run->add_option("--run-id", run_id, "Session name (default: SEA_RUN_ID or host name)");
  run->add_option("command", command, "Command and arguments, after --")->required();

  auto* flush = app.add_subcommand("flush", "Run flush cycles against a session");
  bool once = false;
  flush->add_option("--config,-c", config, "Configuration file")->capture_default_str();
  flush->add_option("--run-id", run_id, "Session name");
  flush->add_flag("--once", once, "Run one cycle and exit");

  auto* finalize = app.add_subcommand("finalize", "Flush everything pending and verify base");
  finalize->add_option("--config,-c", config, "Configuration file")->capture_default_str();
  finalize->add_option("--run-id", run_id, "Session name");

  auto* prefetch = app.add_subcommand("prefetch", "Copy prefetch-matched base files to cache");
  prefetch->add_option("--config,-c", config, "Configuration file")->capture_default_str();
  prefetch->add_option("--run-id", run_id, "Session name");

  auto* check = app.add_subcommand("check", "Validate a configuration and probe its tiers");
  check->add_option("--config,-c", config, "Configuration file")->capture_default_str();

  sea::bench::RunPlan plan;
  std::string mode = "in_memory";
  std::uint64_t base_mibps = 0;
  std::int64_t flush_ms = 100;
  auto* bench = app.add_subcommand("bench", "Synthetic incrementation benchmark");
  bench->add_option("--iters", plan.n_iterations, "Iterations per chunk")->required()->check(CLI::PositiveNumber);
  bench->add_option("--chunks", plan.n_chunks, "Number of chunks")->required()->check(CLI::PositiveNumber);
  bench->add_option("--size", plan.chunk_size, "Chunk size in bytes")->required()->check(CLI::PositiveNumber);
  bench->add_option("--procs", plan.n_processes, "Worker processes")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--mode", mode, "in_memory, flush_all or baseline")
      ->check(CLI::IsMember({"in_memory", "flush_all", "baseline"}))
      ->capture_default_str();
  bench->add_option("--workdir", plan.workdir, "Input, runs and reports directory")->required();
  bench->add_option("--memory-root", plan.memory_root, "RAM-backed directory for the memory tier");
  bench->add_option("--disk-root", plan.disk_root, "Directory for a local disk tier");
  bench->add_option("--base-bw", base_mibps, "Base tier bandwidth cap in MiB/s (0: none)")->capture_default_str();
  bench->add_option("--max-file-size", plan.max_file_size, "Declared largest file in bytes (default: --size)");
  bench->add_option("--flush-interval", flush_ms, "Flush interval in ms")->capture_default_str();
  bench->add_option("--seed", plan.seed, "Input generation seed")->capture_default_str();
  bench->add_option("--run-id", plan.run_id, "Report name");
  bench->add_flag("--keep", plan.keep_files, "Leave tier directories in place");

  std::string report_arg, workdir_arg, calibration;
  double cache_read = 0, cache_write = 0;
  std::string format = "text";
  auto* report = app.add_subcommand("report", "Show a benchmark report and its model verdict");
  report->add_option("run", report_arg, "Run id or report file")->required();
  report->add_option("--workdir", workdir_arg, "Benchmark workdir holding reports/");
  report->add_option("--calibration", calibration, "Calibration file for the model comparison");
  report->add_option("--cache-read", cache_read, "Memory tier read MiB/s for the desk cluster");
  report->add_option("--cache-write", cache_write, "Memory tier write MiB/s for the desk cluster");
  report->add_option("--format", format, "text, json or csv")
      ->check(CLI::IsMember({"text", "json", "csv"}))
      ->capture_default_str();

  std::string job;
  auto* worker = app.add_subcommand("bench-worker", "");
  worker->group("");
  worker->add_option("job", job)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*worker) return sea::bench::worker_main(job);

    if (*run) {
      sea::LaunchOptions opts;
      opts.config_file = config;
      opts.command = command;
      opts.run_id = run_id;
      auto r = sea::sea_run(opts);
      if (!r.final_report.ok()) {
        for (const auto& f : r.final_report.failures)
          sea::diag::warn("not on base: " + f.path + ": " + f.error);
      }
      return r.exit_status;
    }

    if (*check) {
      auto cfg = sea::load_config_file(config);
      auto warnings = sea::validate_runtime(cfg);
      for (const auto& w : warnings) sea::diag::warn(w.message);
      std::cout << sea::to_ini(cfg);
      return 0;
    }

    if (*flush || *finalize || *prefetch) {
      auto m = open_session(config, run_id);
      sea::Lifecycle lifecycle(m.cfg, m.rules, *m.session);
      if (*prefetch) {
        std::cout << lifecycle.prefetch().to_json() << "\n";
        return 0;
      }
      if (*finalize) {
        auto r = lifecycle.finalize();
        std::cout << r.to_json() << "\n";
        return r.ok() ? 0 : sea::kFinalizeFailedStatus;
      }
      for (;;) {
        auto r = lifecycle.flush_cycle(false);
        if (once) {
          std::cout << r.to_json() << "\n";
          return r.failures.empty() ? 0 : 1;
        }
        std::this_thread::sleep_for(m.cfg.flush_interval);
      }
    }

    if (*bench) {
      plan.mode = *sea::bench::parse_mode(mode);
      plan.base_bandwidth = base_mibps << 20;
      plan.flush_interval = std::chrono::milliseconds(flush_ms);
      plan.worker_command = {self_exe().string(), "bench-worker"};
      auto r = sea::bench::run_incrementation(plan);
      std::printf("%s %s makespan %.3f s (workers %.3f s, finalize %.3f s) base files %zu\n",
                  r.run_id.c_str(), r.verified() ? "verified" : "FAILED", r.makespan_s,
                  r.workers_s, r.finalize_s, r.base_files);
      for (const auto& m : r.mismatches) sea::diag::warn(m);
      if (!r.error.empty()) sea::diag::warn(r.error);
      return r.verified() ? 0 : 1;
    }

    if (*report) {
      fs::path file = report_arg;
      if (!fs::exists(file)) {
        fs::path dir = workdir_arg.empty() ? fs::path(".") : fs::path(workdir_arg);
        file = dir / "reports" / (report_arg + ".json");
      }
      auto r = sea::bench::RunReport::from_json(slurp(file));
      sea::model::ClusterSpec cluster;
      if (!calibration.empty()) {
        cluster = sea::model::cluster_from_calibration(sea::model::load_calibration(calibration));
      } else {
        if (cache_read <= 0 || cache_write <= 0)
          throw std::invalid_argument("--cache-read and --cache-write are needed without --calibration");
        cluster = sea::bench::desk_cluster(r.plan, cache_read, cache_write);
      }
      auto v = sea::bench::compare_with_model(r, cluster);
      if (format == "json") {
        std::cout << r.to_json() << "\n";
      } else if (format == "csv") {
        std::cout << "# bandwidth-only model; latency is not included\n" << sea::bench::verdict_csv({v});
      } else {
        std::printf("# bandwidth-only model; latency is not included\n");
        std::printf("run %s (%s, n=%d, chunks=%ld, size=%s, p=%d)\n", r.run_id.c_str(),
                    std::string(sea::bench::to_string(r.plan.mode)).c_str(), r.plan.n_iterations,
                    r.plan.n_chunks, sea::format_size(r.plan.chunk_size).c_str(),
                    r.plan.n_processes);
        std::printf("measured %.3f s, %s bounds [%.3f, %.3f] s: %s", v.measured, v.system.c_str(),
                    v.lower, v.upper, v.verdict.c_str());
        if (v.ratio) std::printf(" (x%.2f)", *v.ratio);
        std::printf("\nverified: %s\n", r.verified() ? "yes" : "no");
      }
      return 0;
    }
  } catch (const sea::LeaseConflict& e) {
    sea::diag::warn(std::string("lease conflict: ") + e.what());
    return 75;
  } catch (const std::exception& e) {
    sea::diag::warn(e.what());
    return 1;
  }
  return 0;
}
