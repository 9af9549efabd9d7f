#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sea/perfmodel.hpp"

// Synthetic incrementation benchmark: every chunk is read once, incremented
// byte-wise n times and saved after each increment. Runs directly against a
// throttled base directory or through Sea with a memory tier in front.
namespace sea::bench {

enum class Mode { in_memory, flush_all, baseline };

std::string_view to_string(Mode m);
std::optional<Mode> parse_mode(std::string_view s);

struct ManifestEntry {
  std::string name;
  std::uint64_t size = 0;
  std::string sha256;
};

struct Manifest {
  std::uint64_t seed = 0;
  std::uint64_t chunk_size = 0;
  std::vector<ManifestEntry> chunks;
};

std::string chunk_name(long index);
std::string output_name(long index, int iteration, int iterations);

// Writes n_chunks seeded pseudorandom files plus manifest.json. Throws
// std::runtime_error when the directory lacks space.
Manifest generate_input(long n_chunks, std::uint64_t chunk_size,
                        const std::filesystem::path& directory, std::uint64_t seed = 1);
// Reuses directory when its manifest matches, regenerating otherwise.
Manifest ensure_input(long n_chunks, std::uint64_t chunk_size,
                      const std::filesystem::path& directory, std::uint64_t seed = 1);

struct RunPlan {
  int n_iterations = 1;
  long n_chunks = 1;
  std::uint64_t chunk_size = 1 << 20;
  int n_processes = 1;
  Mode mode = Mode::in_memory;

  std::filesystem::path workdir;      // input/ and one subdirectory per run
  std::filesystem::path memory_root;  // empty: <workdir>/<run>/mem
  std::filesystem::path disk_root;    // empty: no local disk tier
  std::uint64_t base_bandwidth = 0;   // bytes/s; 0 leaves the base unthrottled
  std::uint64_t max_file_size = 0;    // declared F; 0 means chunk_size
  std::chrono::milliseconds flush_interval{100};
  std::uint64_t seed = 1;
  std::string run_id;                 // empty: mode name plus a timestamp
  bool keep_files = false;            // leave tier directories in place

  // Program and leading arguments that run one worker given a job file,
  // e.g. {"/usr/bin/sea", "bench-worker"}.
  std::vector<std::string> worker_command;
  std::filesystem::path preload_library;  // empty: find_preload_library()

  // Throws std::invalid_argument on a bad field.
  void validate() const;
  std::filesystem::path input_dir() const { return workdir / "input"; }
};

struct TierBytes {
  std::map<std::string, std::uint64_t> read;
  std::map<std::string, std::uint64_t> written;
};

struct RunReport {
  std::string run_id;
  RunPlan plan;
  double makespan_s = 0;
  double workers_s = 0;
  double finalize_s = 0;
  TierBytes bytes;                 // application I/O by tier label
  std::uint64_t flushed_bytes = 0;
  std::string config_ini;          // empty for baseline
  std::string final_report_json;   // empty for baseline
  bool finalize_ok = true;
  std::map<std::string, std::string> checksums;  // final outputs on base
  std::vector<std::string> mismatches;           // missing or wrong finals
  std::size_t base_files = 0;
  std::map<std::string, std::size_t> cache_files;  // left in cache tiers
  std::string error;

  bool verified() const { return error.empty() && mismatches.empty() && finalize_ok; }
  std::string to_json() const;
  static RunReport from_json(std::string_view text);
};

// Runs the plan end to end and writes <workdir>/reports/<run_id>.json.
RunReport run_incrementation(const RunPlan& plan);

// Entry point of one worker process.
int worker_main(const std::filesystem::path& job_file);

struct Verdict {
  std::string system;  // "lustre" or "sea"
  double lower = 0;
  double upper = 0;
  double measured = 0;
  std::string verdict;           // within, above, below
  double gap = 0;                // distance outside the bounds, 0 when within
  std::optional<double> ratio;   // measured / violated bound; unset for a 0 bound
};

// Single-node cluster matching the plan's stand-ins, in MiB and MiB/s.
sea::model::ClusterSpec desk_cluster(const RunPlan& plan, double cache_read_mibps,
                                     double cache_write_mibps);
Verdict compare_with_model(const RunReport& report, const sea::model::ClusterSpec& cluster);
std::string verdict_csv(const std::vector<Verdict>& rows);

}  // namespace sea::bench
