#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Bandwidth-only makespan model for a parallel file system baseline and for
// a tmpfs / local disk / PFS hierarchy. Latency is not modelled, and the
// layers are assumed never to transfer in parallel with each other.
//
// Units are the caller's choice as long as they are consistent: bytes and
// bytes/s give seconds, MiB and MiB/s give seconds too.
namespace sea::model {

struct ClusterSpec {
  int nodes = 1;           // compute nodes in use
  int storage_nodes = 1;   // PFS data servers
  int processes = 1;       // parallel application processes per node
  int storage_disks = 1;   // PFS disks (object storage targets)
  int local_disks = 0;     // local disks per compute node

  double network_bw = 1;     // per node, assumed equal on both sides
  double pfs_disk_read_bw = 1;
  double pfs_disk_write_bw = 1;
  double local_disk_read_bw = 1;
  double local_disk_write_bw = 1;
  double cache_read_bw = 1;  // per node page cache / tmpfs
  double cache_write_bw = 1;

  double tmpfs_space = 0;       // per node
  double local_disk_space = 0;  // per disk
  double file_size = 0;         // largest single file

  // Throws std::invalid_argument naming the first violated bound.
  void validate() const;
};

struct WorkloadSpec {
  double input = 0;         // read once from the PFS
  double intermediate = 0;  // written then re-read
  double final_output = 0;  // written once

  double read = 0;     // total read, for the uncached PFS model
  double written = 0;  // total written, for the uncached PFS model
  double cache_read = 0;
  double cache_written = 0;
};

// Where the data of one run lands in the hierarchy.
struct PlacementBreakdown {
  double tmpfs_read = 0;
  double tmpfs_written = 0;
  double disk_read = 0;
  double disk_written = 0;
  double pfs_read = 0;
  double pfs_written = 0;
};

struct Component {
  std::string label;
  double seconds = 0;
};

struct Makespan {
  double seconds = 0;
  std::vector<Component> components;
};

struct MakespanBounds {
  Makespan lower;
  Makespan upper;
  // Set when the calibration makes the uncached estimate faster than the
  // fully cached one (a cache slower than the layers below it). The two
  // estimates are then swapped so lower <= upper still holds.
  bool inverted = false;
};

enum class Direction { read, write };

double lustre_bandwidth(const ClusterSpec& spec, Direction dir);

double makespan_lustre_nocache(const WorkloadSpec& w, const ClusterSpec& spec);
double makespan_cache(const WorkloadSpec& w, const ClusterSpec& spec);
double makespan_lustre_cached(const WorkloadSpec& w, const ClusterSpec& spec);

PlacementBreakdown sea_placement(const WorkloadSpec& w, const ClusterSpec& spec);
Makespan makespan_sea_upper(const WorkloadSpec& w, const ClusterSpec& spec);
double makespan_sea_lower(const WorkloadSpec& w, const ClusterSpec& spec);

MakespanBounds lustre_bounds(const WorkloadSpec& w, const ClusterSpec& spec);
MakespanBounds sea_bounds(const WorkloadSpec& w, const ClusterSpec& spec);

// Incrementation workload: every chunk is read once, then written once per
// iteration; only the last iteration is final output.
WorkloadSpec derive_workload(int iterations, long chunks, double chunk_size);

struct WorkloadParams {
  int iterations = 1;
  long chunks = 0;
};

struct SweepPoint {
  double value = 0;
  MakespanBounds lustre;
  MakespanBounds sea;
  PlacementBreakdown placement;
};

// Parameters accepted by sweep().
std::span<const std::string_view> sweep_parameters();

// Evaluates both systems at each value of one parameter. The workload is
// re-derived per point, so sweeping chunk size, chunk count or iterations
// changes the data volumes. Throws std::invalid_argument on an unknown name.
std::vector<SweepPoint> sweep(std::string_view parameter,
                              std::span<const double> values,
                              const ClusterSpec& base,
                              const WorkloadParams& workload);

std::string sweep_csv(std::string_view parameter,
                      std::span<const SweepPoint> points);
std::string sweep_json(std::string_view parameter,
                       std::span<const SweepPoint> points);

// Calibration: per-layer bandwidths in the shape of a dd benchmark table
// (layer x {read, cached_read, write}, MiB/s) plus the cluster geometry.
struct Calibration {
  // layer -> action -> value
  std::map<std::string, std::map<std::string, double>> values;
  bool page_cache_backed = false;
};

Calibration parse_calibration(std::string_view text, bool csv);
Calibration load_calibration(const std::filesystem::path& file);
// Builds a ClusterSpec in MiB and MiB/s from a calibration.
ClusterSpec cluster_from_calibration(const Calibration& cal);
// The 5-node, 44-OST, 6-SSD cluster the model was validated against.
Calibration reference_calibration();

}  // namespace sea::model
