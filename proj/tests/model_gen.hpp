#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include "sea/perfmodel.hpp"

namespace sea::testing {

struct ModelInstance {
  model::ClusterSpec spec;
  model::WorkloadSpec work;
};

// Random cluster and workload. With `ordered` set, every layer is at least as
// fast in aggregate as the layer below it (memory >= all local disks >= one
// disk per node >= PFS), which is the regime where the hierarchy is worth
// using and where the cached estimate is a true lower bound.
class ModelGenerator {
 public:
  explicit ModelGenerator(std::uint64_t seed) : rng_(seed) {}

  ModelInstance next(bool ordered = true) {
    ModelInstance m;
    auto& s = m.spec;
    s.nodes = integer(1, 16);
    s.storage_nodes = integer(1, 8);
    s.processes = integer(1, 64);
    s.storage_disks = integer(1, 96);
    s.local_disks = integer(0, 8);
    s.network_bw = real(100, 5000);
    s.pfs_disk_read_bw = real(20, 2000);
    s.pfs_disk_write_bw = real(20, 2000);
    s.local_disk_read_bw = real(50, 1000);
    s.local_disk_write_bw = real(50, 1000);
    s.cache_read_bw = real(500, 20000);
    s.cache_write_bw = real(500, 20000);
    if (ordered) {
      const double c = s.nodes;
      const double lr = model::lustre_bandwidth(s, model::Direction::read);
      const double lw = model::lustre_bandwidth(s, model::Direction::write);
      s.local_disk_read_bw = std::max(s.local_disk_read_bw, lr / c * real(1, 2));
      s.local_disk_write_bw = std::max(s.local_disk_write_bw, lw / c * real(1, 2));
      const double g = std::max(1, s.local_disks);
      s.cache_read_bw = std::max({s.cache_read_bw, g * s.local_disk_read_bw * real(1, 3),
                                  lr / c * real(1, 3)});
      s.cache_write_bw = std::max({s.cache_write_bw, g * s.local_disk_write_bw * real(1, 3),
                                   lw / c * real(1, 3)});
    }
    auto& w = m.work;
    w.input = real(0, 1e6);
    w.intermediate = coin() ? 0.0 : real(0, 1e7);
    w.final_output = real(0, 1e6);
    w.read = w.input + w.intermediate;
    w.written = w.intermediate + w.final_output;
    w.cache_read = w.intermediate;
    w.cache_written = w.intermediate + w.final_output;
    s.file_size = real(0, 4096);
    const double per_node = (w.intermediate + w.final_output) / s.nodes;
    s.tmpfs_space = real(0, 1.5 * per_node + 1);
    s.local_disk_space = real(0, 1.5 * per_node / std::max(1, s.local_disks) + 1);
    if (integer(0, 9) == 0) s.tmpfs_space = s.processes * s.file_size;
    return m;
  }

  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double real(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  bool coin() { return integer(0, 7) == 0; }

 private:
  std::mt19937_64 rng_;
};

inline bool close_rel(double a, double b, double rel = 1e-9) {
  double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) <= rel * scale;
}

// Conservation sums are checked against the larger of the terms involved,
// since the pieces may be many orders of magnitude apart.
inline bool close_sum(double sum, double target, double largest_term,
                      double rel = 1e-9) {
  return std::abs(sum - target) <= rel * std::max({std::abs(target), largest_term, 1e-300});
}

}  // namespace sea::testing
