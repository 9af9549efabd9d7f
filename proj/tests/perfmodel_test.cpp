#include "sea/perfmodel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "model_gen.hpp"
#include "model_oracle.hpp"
#include "test_util.hpp"

namespace sea::model {
namespace {

using testing::close_rel;

// Reference cluster geometry, MiB and MiB/s.
ClusterSpec reference() { return cluster_from_calibration(reference_calibration()); }

// A spec whose PFS bandwidth is exactly one disk: L_r = d_r, L_w = d_w.
ClusterSpec single_stream(double read_bw, double write_bw) {
  ClusterSpec s;
  s.network_bw = 1e9;
  s.pfs_disk_read_bw = read_bw;
  s.pfs_disk_write_bw = write_bw;
  return s;
}

TEST(LustreBandwidth, ReferenceWriteIsDiskBound) {
  ClusterSpec s = reference();
  s.pfs_disk_write_bw = 121;
  // min(5*2980, 4*2980, 121*min(44, 30)) = min(14900, 11920, 3630)
  EXPECT_DOUBLE_EQ(lustre_bandwidth(s, Direction::write), 3630.0);
}

TEST(LustreBandwidth, SingleStreamAndNetworkLimit) {
  ClusterSpec s;
  s.network_bw = 800;
  s.storage_nodes = 3;
  s.pfs_disk_read_bw = 300;
  EXPECT_DOUBLE_EQ(lustre_bandwidth(s, Direction::read), 300.0);
  s.pfs_disk_read_bw = 5000;
  EXPECT_DOUBLE_EQ(lustre_bandwidth(s, Direction::read), 800.0);

  ClusterSpec r = reference();
  r.pfs_disk_read_bw = std::numeric_limits<double>::max() / 1e6;
  EXPECT_DOUBLE_EQ(lustre_bandwidth(r, Direction::read),
                   std::min(r.nodes * r.network_bw, r.storage_nodes * r.network_bw));
}

TEST(Makespan, LustreNoCacheWorkedNumber) {
  auto s = single_stream(1381.14, 121.00);
  WorkloadSpec w;
  w.read = w.written = 1000;
  // 1000/1381.14 + 1000/121, evaluated independently.
  EXPECT_NEAR(makespan_lustre_nocache(w, s), 8.988502371438996, 1e-9);
  EXPECT_EQ(makespan_lustre_nocache(WorkloadSpec{}, s), 0.0);
  WorkloadSpec twice = w;
  twice.read *= 2;
  twice.written *= 2;
  EXPECT_TRUE(close_rel(makespan_lustre_nocache(twice, s),
                        2 * makespan_lustre_nocache(w, s)));
}

TEST(Makespan, CacheWorkedNumber) {
  ClusterSpec s;
  s.nodes = 5;
  s.cache_read_bw = 6676.48;
  s.cache_write_bw = 2560.00;
  WorkloadSpec w;
  w.cache_read = w.cache_written = 10000;
  // 10000/33382.4 + 10000/12800
  EXPECT_NEAR(makespan_cache(w, s), 1.0808090490797546, 1e-9);
  EXPECT_EQ(makespan_cache(WorkloadSpec{}, s), 0.0);
  ClusterSpec doubled = s;
  doubled.nodes = 10;
  EXPECT_TRUE(close_rel(makespan_cache(w, doubled), makespan_cache(w, s) / 2));
}

TEST(Makespan, LustreCachedEdgeCasesAndDominance) {
  auto s = reference();
  WorkloadSpec only_input;
  only_input.input = 617000;
  EXPECT_DOUBLE_EQ(makespan_lustre_cached(only_input, s),
                   617000 / lustre_bandwidth(s, Direction::read));

  testing::ModelGenerator gen(21);
  for (int i = 0; i < 2000; ++i) {
    auto m = gen.next(false);
    const double lr = lustre_bandwidth(m.spec, Direction::read);
    const double lw = lustre_bandwidth(m.spec, Direction::write);
    if (m.spec.nodes * m.spec.cache_read_bw < lr ||
        m.spec.nodes * m.spec.cache_write_bw < lw)
      continue;
    EXPECT_LE(makespan_lustre_cached(m.work, m.spec),
              makespan_lustre_nocache(m.work, m.spec) * (1 + 1e-12));
  }
}

TEST(Placement, TmpfsAtReservationBoundaryIsUnused) {
  auto s = reference();
  s.tmpfs_space = s.processes * s.file_size;
  auto w = derive_workload(10, 1000, s.file_size);
  auto p = sea_placement(w, s);
  EXPECT_EQ(p.tmpfs_read, 0.0);
  EXPECT_EQ(p.tmpfs_written, 0.0);
  s.tmpfs_space = 0;
  EXPECT_EQ(sea_placement(w, s).tmpfs_written, 0.0);
}

TEST(Placement, ReferenceTmpfsShare) {
  auto s = reference();
  ASSERT_DOUBLE_EQ(s.tmpfs_space, 129024);
  ASSERT_DOUBLE_EQ(s.file_size, 617);
  auto w = derive_workload(10, 1000, 617);
  ASSERT_DOUBLE_EQ(w.intermediate, 5553000);
  auto p = sea_placement(w, s);
  // 5 * (129024 - 6*617) = 5 * 125322
  EXPECT_DOUBLE_EQ(p.tmpfs_read, 626610);
  EXPECT_DOUBLE_EQ(p.tmpfs_written, 626610);
}

TEST(Placement, NoLocalDisks) {
  auto s = reference();
  s.local_disks = 0;
  auto w = derive_workload(10, 1000, 617);
  auto p = sea_placement(w, s);
  EXPECT_EQ(p.disk_read, 0.0);
  EXPECT_EQ(p.disk_written, 0.0);
  EXPECT_DOUBLE_EQ(p.pfs_read, w.intermediate - p.tmpfs_read);
  EXPECT_DOUBLE_EQ(p.pfs_written, w.intermediate + w.final_output - p.tmpfs_written);
  auto up = makespan_sea_upper(w, s);
  EXPECT_EQ(up.components[1].label, "local_disk");
  EXPECT_EQ(up.components[1].seconds, 0.0);
}

TEST(SeaUpper, EverythingInTmpfs) {
  auto s = reference();
  s.tmpfs_space = 1e9;
  auto w = derive_workload(3, 10, 617);
  auto up = makespan_sea_upper(w, s);
  const double lr = lustre_bandwidth(s, Direction::read);
  const double tmpfs = w.intermediate / (s.nodes * s.cache_read_bw) +
                       (w.intermediate + w.final_output) / (s.nodes * s.cache_write_bw);
  EXPECT_TRUE(close_rel(up.seconds, w.input / lr + tmpfs));
  EXPECT_EQ(up.components[1].seconds, 0.0);
  EXPECT_TRUE(close_rel(up.components[0].seconds, w.input / lr));
}

TEST(SeaUpper, ReferenceComponentsByHand) {
  auto s = reference();
  auto w = derive_workload(10, 1000, 617);
  auto up = makespan_sea_upper(w, s);
  // Placement, evaluated independently:
  //   tmpfs   read 626610, write 626610
  //   disks   capacity 5 * (6*457728 - 3702) = 13713330
  //           read  min(5553000-626610, cap) = 4926390
  //           write min(6170000-626610, cap) = 5543390
  //   lustre  read 0, write 0
  //   L_r = min(14900, 11920, 1381.14*30) = 11920
  const double tmpfs = 626610 / (5 * 6676.48) + 626610 / (5 * 2560.0);
  const double disk = 4926390 / (6 * 5 * 501.70) + 5543390 / (6 * 5 * 426.0);
  const double lustre = 617000 / 11920.0;
  ASSERT_EQ(up.components.size(), 3u);
  EXPECT_TRUE(close_rel(up.components[0].seconds, lustre));
  EXPECT_TRUE(close_rel(up.components[1].seconds, disk));
  EXPECT_TRUE(close_rel(up.components[2].seconds, tmpfs));
  EXPECT_TRUE(close_rel(up.seconds, lustre + disk + tmpfs));
}

TEST(SeaUpper, NoIntermediateOrFinalData) {
  auto s = reference();
  WorkloadSpec w;
  w.input = 5000;
  EXPECT_TRUE(close_rel(makespan_sea_upper(w, s).seconds,
                        5000 / lustre_bandwidth(s, Direction::read)));
  EXPECT_TRUE(close_rel(makespan_sea_lower(w, s),
                        5000 / lustre_bandwidth(s, Direction::read)));
}

TEST(SeaLower, IdenticalToLustreCached) {
  testing::ModelGenerator gen(5);
  for (int i = 0; i < 1000; ++i) {
    auto m = gen.next(i % 2 == 0);
    EXPECT_TRUE(close_rel(makespan_sea_lower(m.work, m.spec),
                          makespan_lustre_cached(m.work, m.spec)));
  }
}

TEST(Workload, Derivation) {
  auto w = derive_workload(10, 1000, 617);
  EXPECT_DOUBLE_EQ(w.input, 617000);
  EXPECT_DOUBLE_EQ(w.intermediate + w.final_output, 6170000);
  EXPECT_DOUBLE_EQ(w.final_output, 617000);
  EXPECT_DOUBLE_EQ(w.intermediate, 5553000);
  EXPECT_DOUBLE_EQ(w.read, w.input + w.intermediate);
  EXPECT_DOUBLE_EQ(w.written, w.intermediate + w.final_output);

  auto one = derive_workload(1, 1000, 617);
  EXPECT_EQ(one.intermediate, 0.0);
  EXPECT_DOUBLE_EQ(one.read, one.input);
  EXPECT_DOUBLE_EQ(one.written, one.final_output);

  auto none = derive_workload(5, 0, 617);
  EXPECT_EQ(none.input + none.intermediate + none.final_output + none.read +
                none.written,
            0.0);
  EXPECT_THROW(derive_workload(0, 1, 1), std::invalid_argument);
}

TEST(Properties, ConservationAndBoundOrdering) {
  testing::ModelGenerator gen(1);
  for (int i = 0; i < 5000; ++i) {
    auto m = gen.next();
    auto p = sea_placement(m.work, m.spec);
    const double reads = m.work.intermediate;
    const double writes = m.work.intermediate + m.work.final_output;
    EXPECT_TRUE(testing::close_sum(p.tmpfs_read + p.disk_read + p.pfs_read, reads,
                                   std::max({p.tmpfs_read, p.disk_read, p.pfs_read})));
    EXPECT_TRUE(testing::close_sum(p.tmpfs_written + p.disk_written + p.pfs_written,
                                   writes,
                                   std::max({p.tmpfs_written, p.disk_written,
                                             p.pfs_written})));
    for (double v : {p.tmpfs_read, p.tmpfs_written, p.disk_read, p.disk_written})
      EXPECT_GE(v, 0.0);
    EXPECT_GE(p.pfs_read, -1e-9 * reads);
    EXPECT_GE(p.pfs_written, -1e-9 * writes);

    auto lb = lustre_bounds(m.work, m.spec);
    auto sb = sea_bounds(m.work, m.spec);
    EXPECT_FALSE(lb.inverted);
    EXPECT_FALSE(sb.inverted);
    EXPECT_LE(lb.lower.seconds, lb.upper.seconds);
    EXPECT_LE(sb.lower.seconds, sb.upper.seconds);
    EXPECT_GE(lb.lower.seconds, 0.0);
  }
}

TEST(Properties, ComponentsSumToBounds) {
  testing::ModelGenerator gen(2);
  for (int i = 0; i < 500; ++i) {
    auto m = gen.next();
    for (const auto& b : {lustre_bounds(m.work, m.spec), sea_bounds(m.work, m.spec)}) {
      for (const auto* mk : {&b.lower, &b.upper}) {
        double sum = 0;
        for (const auto& c : mk->components) sum += c.seconds;
        EXPECT_TRUE(close_rel(sum, mk->seconds));
      }
    }
  }
}

TEST(Properties, AgreesWithOracle) {
  testing::ModelGenerator gen(3);
  for (int i = 0; i < 1000; ++i) {
    auto m = gen.next(i % 3 != 0);
    auto x = oracle::symbols(m.work, m.spec);
    EXPECT_TRUE(close_rel(lustre_bandwidth(m.spec, Direction::read), oracle::L_r(x)));
    EXPECT_TRUE(close_rel(lustre_bandwidth(m.spec, Direction::write), oracle::L_w(x)));
    EXPECT_TRUE(close_rel(makespan_lustre_nocache(m.work, m.spec), oracle::M_l(x)));
    EXPECT_TRUE(close_rel(makespan_cache(m.work, m.spec), oracle::M_c(x)));
    EXPECT_TRUE(close_rel(makespan_lustre_cached(m.work, m.spec), oracle::M_lc(x)));
    EXPECT_TRUE(close_rel(makespan_sea_upper(m.work, m.spec).seconds, oracle::M_S(x)));
    EXPECT_TRUE(close_rel(makespan_sea_lower(m.work, m.spec), oracle::M_Sc(x)));
  }
}

TEST(Properties, MonotoneInHierarchyResources) {
  testing::ModelGenerator gen(4);
  for (int i = 0; i < 1000; ++i) {
    auto m = gen.next();
    m.spec.local_disks = std::max(1, m.spec.local_disks);
    const double base = makespan_sea_upper(m.work, m.spec).seconds;
    const double slack = 1e-9 * base;

    auto more_disks = m.spec;
    more_disks.local_disks += gen.integer(1, 3);
    // More disks only helps when memory still outpaces them all.
    if (more_disks.cache_read_bw >= more_disks.local_disks * more_disks.local_disk_read_bw &&
        more_disks.cache_write_bw >= more_disks.local_disks * more_disks.local_disk_write_bw) {
      EXPECT_LE(makespan_sea_upper(m.work, more_disks).seconds, base + slack);
    }

    auto more_tmpfs = m.spec;
    more_tmpfs.tmpfs_space += gen.real(0, 1e6);
    EXPECT_LE(makespan_sea_upper(m.work, more_tmpfs).seconds, base + slack);

    auto more_space = m.spec;
    more_space.local_disk_space += gen.real(0, 1e6);
    EXPECT_LE(makespan_sea_upper(m.work, more_space).seconds, base + slack);
  }
}

TEST(Properties, CapacityBoundary) {
  auto s = reference();
  auto w = derive_workload(10, 1000, 617);
  s.tmpfs_space = s.processes * s.file_size;
  EXPECT_EQ(sea_placement(w, s).tmpfs_read, 0.0);
  const double eps = 3.5;
  s.tmpfs_space += eps;
  EXPECT_DOUBLE_EQ(sea_placement(w, s).tmpfs_read, s.nodes * eps);
  EXPECT_DOUBLE_EQ(sea_placement(w, s).tmpfs_written, s.nodes * eps);
}

TEST(Properties, InverseBandwidthScaling) {
  testing::ModelGenerator gen(6);
  for (int i = 0; i < 300; ++i) {
    auto m = gen.next();
    auto scaled = m.spec;
    const double k = gen.real(0.1, 10);
    for (double* bw : {&scaled.network_bw, &scaled.pfs_disk_read_bw,
                       &scaled.pfs_disk_write_bw, &scaled.local_disk_read_bw,
                       &scaled.local_disk_write_bw, &scaled.cache_read_bw,
                       &scaled.cache_write_bw})
      *bw *= k;
    EXPECT_TRUE(close_rel(makespan_sea_upper(m.work, scaled).seconds,
                          makespan_sea_upper(m.work, m.spec).seconds / k, 1e-9));
    EXPECT_TRUE(close_rel(makespan_lustre_nocache(m.work, scaled),
                          makespan_lustre_nocache(m.work, m.spec) / k, 1e-9));
    EXPECT_TRUE(close_rel(makespan_sea_lower(m.work, scaled),
                          makespan_sea_lower(m.work, m.spec) / k, 1e-9));
  }
}

TEST(Bounds, InvertedCalibrationIsFlagged) {
  ClusterSpec s = single_stream(1000, 1000);
  s.cache_read_bw = 1;
  s.cache_write_bw = 1;
  auto w = derive_workload(3, 10, 1);
  auto b = lustre_bounds(w, s);
  EXPECT_TRUE(b.inverted);
  EXPECT_LE(b.lower.seconds, b.upper.seconds);
}

TEST(Sweep, EmptyAndUnknown) {
  auto s = reference();
  EXPECT_TRUE(sweep("nodes", {}, s, {10, 1000}).empty());
  std::vector<double> one{1};
  EXPECT_THROW(sweep("flux_capacitors", one, s, {10, 1000}), std::invalid_argument);
}

TEST(Sweep, DisksNonIncreasing) {
  auto s = reference();
  std::vector<double> g{1, 2, 3, 4, 5, 6};
  auto pts = sweep("local_disks", g, s, {5, 1000});
  ASSERT_EQ(pts.size(), 6u);
  for (std::size_t i = 1; i < pts.size(); ++i)
    EXPECT_LE(pts[i].sea.upper.seconds, pts[i - 1].sea.upper.seconds);
}

TEST(Sweep, NodesRederiveCapacity) {
  auto s = reference();
  std::vector<double> c{1, 2, 3, 4, 5, 6, 7, 8};
  auto pts = sweep("nodes", c, s, {10, 1000});
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_DOUBLE_EQ(pts[i].placement.tmpfs_read,
                     (i + 1) * (129024.0 - 6 * 617));
    // The workload is fixed, so more nodes never hurt either system.
    if (i > 0) {
      EXPECT_LE(pts[i].lustre.upper.seconds, pts[i - 1].lustre.upper.seconds);
      EXPECT_LE(pts[i].sea.upper.seconds, pts[i - 1].sea.upper.seconds);
      EXPECT_LE(pts[i].sea.lower.seconds, pts[i - 1].sea.lower.seconds);
    }
  }
  auto csv = sweep_csv("nodes", pts);
  EXPECT_NE(csv.find("param,value,lustre_lower_s,lustre_upper_s,sea_lower_s,sea_upper_s"),
            std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 10);
  auto json = sweep_json("nodes", pts);
  EXPECT_NE(json.find("\"points\""), std::string::npos);
}

TEST(Calibration, IniAndCsvAgree) {
  const char* ini = R"(
[cluster]
nodes = 2
storage_nodes = 1
processes = 3
storage_disks = 4
local_disks = 1
network = 1000
tmpfs_space = 2 GiB
local_disk_space = 10 GiB
file_size = 64 MiB
page_cache_backed = yes
[tmpfs]
read = 100
cached_read = 90
write = 80
[local disk]
read = 50
write = 40
[Lustre]
read = 30
write = 20
)";
  const char* csv = R"(layer,action,value
cluster,nodes,2
cluster,storage_nodes,1
cluster,processes,3
cluster,storage_disks,4
cluster,local_disks,1
cluster,network,1000
cluster,tmpfs_space,2048
cluster,local_disk_space,10 GiB
cluster,file_size,64
cluster,page_cache_backed,yes
tmpfs,read,100
tmpfs,cached read,90
tmpfs,write,80
local disk,read,50
local disk,write,40
lustre,read,30
lustre,write,20
)";
  auto a = cluster_from_calibration(parse_calibration(ini, false));
  auto b = cluster_from_calibration(parse_calibration(csv, true));
  EXPECT_EQ(a.tmpfs_space, 2048.0);
  EXPECT_EQ(a.local_disk_space, 10240.0);
  EXPECT_EQ(a.cache_read_bw, 90.0);  // page-cache-backed memory tier
  EXPECT_EQ(b.cache_read_bw, 90.0);
  EXPECT_EQ(a.pfs_disk_write_bw, 20.0);
  EXPECT_EQ(b.local_disk_space, a.local_disk_space);
  EXPECT_EQ(b.nodes, a.nodes);
  EXPECT_THROW(cluster_from_calibration(parse_calibration("[tmpfs]\nread=1\n", false)),
               std::invalid_argument);
}

TEST(Calibration, ReferenceGeometry) {
  auto s = reference();
  EXPECT_EQ(s.nodes, 5);
  EXPECT_EQ(s.storage_disks, 44);
  EXPECT_EQ(s.local_disks, 6);
  EXPECT_DOUBLE_EQ(s.pfs_disk_read_bw, 1381.14);
  EXPECT_DOUBLE_EQ(s.pfs_disk_write_bw, 121.00);
  EXPECT_DOUBLE_EQ(s.cache_read_bw, 6676.48);
  EXPECT_DOUBLE_EQ(s.local_disk_space, 447 * 1024.0);
}

}  // namespace
}  // namespace sea::model
