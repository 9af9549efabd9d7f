#include "sea/perfmodel.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "sea/config.hpp"

namespace sea::model {

namespace {

constexpr double kMiB = 1024.0 * 1024.0;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("cluster spec: ") + what);
}

// Capacity left for cached data on a layer of `space` bytes per node once
// every process has room for one more file.
double spare_capacity(const ClusterSpec& spec, double space) {
  return std::max(spec.nodes * (space - spec.processes * spec.file_size), 0.0);
}

Makespan sum_of(std::vector<Component> parts) {
  Makespan m;
  for (const auto& c : parts) m.seconds += c.seconds;
  m.components = std::move(parts);
  return m;
}

MakespanBounds ordered(Makespan lower, Makespan upper) {
  MakespanBounds b;
  if (lower.seconds > upper.seconds) {
    // Equal estimates can differ in the last bits; only flag a real inversion.
    b.inverted = lower.seconds - upper.seconds > 1e-12 * lower.seconds;
    std::swap(lower, upper);
  }
  b.lower = std::move(lower);
  b.upper = std::move(upper);
  return b;
}

}  // namespace

void ClusterSpec::validate() const {
  require(nodes >= 1, "nodes must be >= 1");
  require(storage_nodes >= 1, "storage_nodes must be >= 1");
  require(processes >= 1, "processes must be >= 1");
  require(storage_disks >= 1, "storage_disks must be >= 1");
  require(local_disks >= 0, "local_disks must be >= 0");
  require(network_bw > 0, "network bandwidth must be > 0");
  require(pfs_disk_read_bw > 0 && pfs_disk_write_bw > 0,
          "PFS disk bandwidth must be > 0");
  require(local_disk_read_bw > 0 && local_disk_write_bw > 0,
          "local disk bandwidth must be > 0");
  require(cache_read_bw > 0 && cache_write_bw > 0,
          "cache bandwidth must be > 0");
  require(tmpfs_space >= 0 && local_disk_space >= 0 && file_size >= 0,
          "sizes must be >= 0");
}

double lustre_bandwidth(const ClusterSpec& spec, Direction dir) {
  double disk = dir == Direction::read ? spec.pfs_disk_read_bw
                                       : spec.pfs_disk_write_bw;
  double streams = std::min<double>(spec.storage_disks,
                                    double(spec.nodes) * spec.processes);
  return std::min({spec.nodes * spec.network_bw,
                   spec.storage_nodes * spec.network_bw, disk * streams});
}

double makespan_lustre_nocache(const WorkloadSpec& w, const ClusterSpec& spec) {
  return w.read / lustre_bandwidth(spec, Direction::read) +
         w.written / lustre_bandwidth(spec, Direction::write);
}

double makespan_cache(const WorkloadSpec& w, const ClusterSpec& spec) {
  return w.cache_read / (spec.nodes * spec.cache_read_bw) +
         w.cache_written / (spec.nodes * spec.cache_write_bw);
}

double makespan_lustre_cached(const WorkloadSpec& w, const ClusterSpec& spec) {
  WorkloadSpec cached = w;
  cached.cache_read = w.intermediate;
  cached.cache_written = w.intermediate + w.final_output;
  return w.input / lustre_bandwidth(spec, Direction::read) +
         makespan_cache(cached, spec);
}

PlacementBreakdown sea_placement(const WorkloadSpec& w,
                                 const ClusterSpec& spec) {
  const double reads = w.intermediate;
  const double writes = w.intermediate + w.final_output;
  const double tmpfs_cap = spare_capacity(spec, spec.tmpfs_space);
  const double disk_cap =
      spare_capacity(spec, spec.local_disks * spec.local_disk_space);

  PlacementBreakdown p;
  p.tmpfs_read = std::min(reads, tmpfs_cap);
  p.tmpfs_written = std::min(writes, tmpfs_cap);
  p.disk_read = std::min(reads - p.tmpfs_read, disk_cap);
  p.disk_written = std::min(writes - p.tmpfs_written, disk_cap);
  p.pfs_read = reads - p.disk_read - p.tmpfs_read;
  p.pfs_written = writes - p.disk_written - p.tmpfs_written;
  return p;
}

Makespan makespan_sea_upper(const WorkloadSpec& w, const ClusterSpec& spec) {
  const auto p = sea_placement(w, spec);
  const double c = spec.nodes;
  const double tmpfs = p.tmpfs_read / (c * spec.cache_read_bw) +
                       p.tmpfs_written / (c * spec.cache_write_bw);
  double disk = 0;
  if (spec.local_disks > 0) {
    const double disks = double(spec.local_disks) * c;
    disk = p.disk_read / (disks * spec.local_disk_read_bw) +
           p.disk_written / (disks * spec.local_disk_write_bw);
  }
  const double pfs_r = lustre_bandwidth(spec, Direction::read);
  const double pfs_w = lustre_bandwidth(spec, Direction::write);
  const double lustre =
      w.input / pfs_r + p.pfs_read / pfs_r + p.pfs_written / pfs_w;
  return sum_of({{"lustre", lustre}, {"local_disk", disk}, {"tmpfs", tmpfs}});
}

double makespan_sea_lower(const WorkloadSpec& w, const ClusterSpec& spec) {
  const double c = spec.nodes;
  return w.input / lustre_bandwidth(spec, Direction::read) +
         w.intermediate / (c * spec.cache_read_bw) +
         (w.intermediate + w.final_output) / (c * spec.cache_write_bw);
}

namespace {

// Everything after the first read served from memory; shared by both systems.
Makespan cached_makespan(const WorkloadSpec& w, const ClusterSpec& spec) {
  const double c = spec.nodes;
  return sum_of(
      {{"input", w.input / lustre_bandwidth(spec, Direction::read)},
       {"cache_read", w.intermediate / (c * spec.cache_read_bw)},
       {"cache_write",
        (w.intermediate + w.final_output) / (c * spec.cache_write_bw)}});
}

}  // namespace

MakespanBounds lustre_bounds(const WorkloadSpec& w, const ClusterSpec& spec) {
  spec.validate();
  const double pfs_r = lustre_bandwidth(spec, Direction::read);
  const double pfs_w = lustre_bandwidth(spec, Direction::write);
  Makespan upper =
      sum_of({{"read", w.read / pfs_r}, {"write", w.written / pfs_w}});
  return ordered(cached_makespan(w, spec), std::move(upper));
}

MakespanBounds sea_bounds(const WorkloadSpec& w, const ClusterSpec& spec) {
  spec.validate();
  return ordered(cached_makespan(w, spec), makespan_sea_upper(w, spec));
}

WorkloadSpec derive_workload(int iterations, long chunks, double chunk_size) {
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (chunks < 0) throw std::invalid_argument("chunks must be >= 0");
  WorkloadSpec w;
  const double chunk_bytes = double(chunks) * chunk_size;
  w.input = chunk_bytes;
  w.final_output = chunk_bytes;
  w.intermediate = double(iterations - 1) * chunk_bytes;
  w.read = w.input + w.intermediate;
  w.written = w.intermediate + w.final_output;
  w.cache_read = w.intermediate;
  w.cache_written = w.intermediate + w.final_output;
  return w;
}

namespace {

struct Knob {
  std::string_view name;
  std::function<void(ClusterSpec&, WorkloadParams&, double)> apply;
};

const std::array<Knob, 11>& knobs() {
  static const std::array<Knob, 11> table{{
      {"nodes", [](ClusterSpec& s, WorkloadParams&, double v) { s.nodes = int(v); }},
      {"storage_nodes",
       [](ClusterSpec& s, WorkloadParams&, double v) { s.storage_nodes = int(v); }},
      {"processes",
       [](ClusterSpec& s, WorkloadParams&, double v) { s.processes = int(v); }},
      {"storage_disks",
       [](ClusterSpec& s, WorkloadParams&, double v) { s.storage_disks = int(v); }},
      {"local_disks",
       [](ClusterSpec& s, WorkloadParams&, double v) { s.local_disks = int(v); }},
      {"network", [](ClusterSpec& s, WorkloadParams&, double v) { s.network_bw = v; }},
      {"iterations",
       [](ClusterSpec&, WorkloadParams& w, double v) { w.iterations = int(v); }},
      {"chunks", [](ClusterSpec&, WorkloadParams& w, double v) { w.chunks = long(v); }},
      {"file_size", [](ClusterSpec& s, WorkloadParams&, double v) { s.file_size = v; }},
      {"tmpfs_space",
       [](ClusterSpec& s, WorkloadParams&, double v) { s.tmpfs_space = v; }},
      {"local_disk_space",
       [](ClusterSpec& s, WorkloadParams&, double v) { s.local_disk_space = v; }},
  }};
  return table;
}

}  // namespace

std::span<const std::string_view> sweep_parameters() {
  static const auto names = [] {
    std::array<std::string_view, 11> out{};
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = knobs()[i].name;
    return out;
  }();
  return names;
}

std::vector<SweepPoint> sweep(std::string_view parameter,
                              std::span<const double> values,
                              const ClusterSpec& base,
                              const WorkloadParams& workload) {
  const Knob* knob = nullptr;
  for (const auto& k : knobs())
    if (k.name == parameter) knob = &k;
  if (!knob)
    throw std::invalid_argument("unknown sweep parameter '" +
                                std::string(parameter) + "'");
  std::vector<SweepPoint> out;
  out.reserve(values.size());
  for (double v : values) {
    ClusterSpec spec = base;
    WorkloadParams params = workload;
    knob->apply(spec, params, v);
    auto w = derive_workload(params.iterations, params.chunks, spec.file_size);
    SweepPoint pt;
    pt.value = v;
    pt.lustre = lustre_bounds(w, spec);
    pt.sea = sea_bounds(w, spec);
    pt.placement = sea_placement(w, spec);
    out.push_back(std::move(pt));
  }
  return out;
}

static double component(const Makespan& m, std::string_view label) {
  for (const auto& c : m.components)
    if (c.label == label) return c.seconds;
  return 0;
}

std::string sweep_csv(std::string_view parameter,
                      std::span<const SweepPoint> points) {
  std::ostringstream out;
  out << "# bandwidth-only model; latency is not included\n";
  out << "param,value,lustre_lower_s,lustre_upper_s,sea_lower_s,sea_upper_s,"
         "sea_tmpfs_s,sea_local_disk_s,sea_lustre_s,"
         "tmpfs_read,tmpfs_written,disk_read,disk_written,lustre_read,"
         "lustre_written\n";
  out << std::setprecision(10);
  for (const auto& p : points) {
    const auto& up = p.sea.inverted ? p.sea.lower : p.sea.upper;
    out << parameter << ',' << p.value << ',' << p.lustre.lower.seconds << ','
        << p.lustre.upper.seconds << ',' << p.sea.lower.seconds << ','
        << p.sea.upper.seconds << ',' << component(up, "tmpfs") << ','
        << component(up, "local_disk") << ',' << component(up, "lustre") << ','
        << p.placement.tmpfs_read << ',' << p.placement.tmpfs_written << ','
        << p.placement.disk_read << ',' << p.placement.disk_written << ','
        << p.placement.pfs_read << ',' << p.placement.pfs_written << '\n';
  }
  return out.str();
}

std::string sweep_json(std::string_view parameter,
                       std::span<const SweepPoint> points) {
  auto makespan_json = [](const Makespan& m) {
    nlohmann::json comps = nlohmann::json::object();
    for (const auto& c : m.components) comps[c.label] = c.seconds;
    return nlohmann::json{{"seconds", m.seconds}, {"components", comps}};
  };
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& p : points) {
    rows.push_back({
        {"value", p.value},
        {"lustre",
         {{"lower", makespan_json(p.lustre.lower)},
          {"upper", makespan_json(p.lustre.upper)},
          {"inverted", p.lustre.inverted}}},
        {"sea",
         {{"lower", makespan_json(p.sea.lower)},
          {"upper", makespan_json(p.sea.upper)},
          {"inverted", p.sea.inverted}}},
        {"placement",
         {{"tmpfs_read", p.placement.tmpfs_read},
          {"tmpfs_written", p.placement.tmpfs_written},
          {"disk_read", p.placement.disk_read},
          {"disk_written", p.placement.disk_written},
          {"lustre_read", p.placement.pfs_read},
          {"lustre_written", p.placement.pfs_written}}},
    });
  }
  nlohmann::json doc{{"param", std::string(parameter)},
                     {"note", "bandwidth-only model; latency is not included"},
                     {"points", rows}};
  return doc.dump(2) + "\n";
}

namespace {

std::string canonical(std::string_view s) {
  std::string out;
  for (char ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch)) || ch == '-')
      out.push_back('_');
    else
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  while (!out.empty() && out.front() == '_') out.erase(out.begin());
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

// Plain numbers are MiB or MiB/s; sizes with a binary suffix are converted.
double parse_value(std::string_view text) {
  text = trim(text);
  bool has_unit = !text.empty() && std::isalpha(static_cast<unsigned char>(text.back()));
  if (has_unit) return double(sea::parse_size(text)) / kMiB;
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw std::invalid_argument("calibration: bad number '" + std::string(text) + "'");
  return v;
}

void store(Calibration& cal, std::string_view layer, std::string_view action,
           std::string_view value) {
  auto l = canonical(layer);
  auto a = canonical(action);
  if (l == "cluster" && a == "page_cache_backed") {
    auto v = canonical(value);
    cal.page_cache_backed = v == "true" || v == "yes" || v == "1";
    return;
  }
  cal.values[l][a] = parse_value(value);
}

}  // namespace

Calibration parse_calibration(std::string_view text, bool csv) {
  Calibration cal;
  std::istringstream in{std::string(text)};
  std::string line;
  std::string section;
  bool header_seen = false;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto body = trim(line);
    if (body.empty()) continue;
    if (csv) {
      std::vector<std::string_view> cells;
      std::size_t start = 0;
      while (true) {
        auto comma = body.find(',', start);
        cells.push_back(trim(body.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
      }
      if (cells.size() != 3)
        throw std::invalid_argument("calibration: expected layer,action,value");
      if (!header_seen && canonical(cells[0]) == "layer") {
        header_seen = true;
        continue;
      }
      header_seen = true;
      store(cal, cells[0], cells[1], cells[2]);
    } else {
      if (body.front() == '[' && body.back() == ']') {
        section = std::string(body.substr(1, body.size() - 2));
        continue;
      }
      auto eq = body.find('=');
      if (eq == std::string_view::npos || section.empty())
        throw std::invalid_argument("calibration: expected key = value in a section");
      store(cal, section, trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
    }
  }
  return cal;
}

Calibration load_calibration(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::invalid_argument("cannot read " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_calibration(ss.str(), file.extension() == ".csv");
}

ClusterSpec cluster_from_calibration(const Calibration& cal) {
  auto get = [&](const std::string& layer, const std::string& key) {
    auto l = cal.values.find(layer);
    if (l != cal.values.end()) {
      auto k = l->second.find(key);
      if (k != l->second.end()) return k->second;
    }
    throw std::invalid_argument("calibration: missing " + layer + "." + key);
  };
  auto pfs_layer = cal.values.count("lustre") ? "lustre" : "pfs";
  ClusterSpec s;
  s.nodes = int(get("cluster", "nodes"));
  s.storage_nodes = int(get("cluster", "storage_nodes"));
  s.processes = int(get("cluster", "processes"));
  s.storage_disks = int(get("cluster", "storage_disks"));
  s.local_disks = int(get("cluster", "local_disks"));
  s.network_bw = get("cluster", "network");
  s.tmpfs_space = get("cluster", "tmpfs_space");
  s.local_disk_space = get("cluster", "local_disk_space");
  s.file_size = get("cluster", "file_size");
  s.pfs_disk_read_bw = get(pfs_layer, "read");
  s.pfs_disk_write_bw = get(pfs_layer, "write");
  s.local_disk_read_bw = get("local_disk", "read");
  s.local_disk_write_bw = get("local_disk", "write");
  s.cache_read_bw = cal.page_cache_backed ? get("tmpfs", "cached_read")
                                          : get("tmpfs", "read");
  s.cache_write_bw = get("tmpfs", "write");
  s.validate();
  return s;
}

Calibration reference_calibration() {
  return parse_calibration(R"(
[cluster]
nodes = 5
storage_nodes = 4
processes = 6
storage_disks = 44
local_disks = 6
network = 2980        # 25 GbE per node, MiB/s
tmpfs_space = 126 GiB
local_disk_space = 447 GiB
file_size = 617 MiB

[tmpfs]
read = 6676.48
cached_read = 6318.08
write = 2560.00

[local_disk]
read = 501.70
cached_read = 7034.88
write = 426.00

[lustre]
read = 1381.14
cached_read = 6103.04
write = 121.00
)",
                           false);
}

}  // namespace sea::model
