#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sea/perfmodel.hpp"

namespace model = sea::model;

namespace {

struct SweepArg {
  std::string parameter;
  std::vector<double> values;
};

// "name=a..b" (unit steps), "name=a..b:step" or "name=v1,v2,...".
SweepArg parse_sweep(const std::string& text) {
  auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw std::invalid_argument("--sweep expects param=values");
  SweepArg out{text.substr(0, eq), {}};
  std::string rest = text.substr(eq + 1);
  if (auto dots = rest.find(".."); dots != std::string::npos) {
    double step = 1;
    auto colon = rest.find(':', dots);
    if (colon != std::string::npos) {
      step = std::stod(rest.substr(colon + 1));
      rest = rest.substr(0, colon);
    }
    double lo = std::stod(rest.substr(0, dots));
    double hi = std::stod(rest.substr(dots + 2));
    if (step <= 0) throw std::invalid_argument("--sweep step must be positive");
    for (long i = 0; lo + double(i) * step <= hi + 1e-9 * step; ++i) out.values.push_back(lo + double(i) * step);
    return out;
  }
  std::size_t pos = 0;
  while (pos < rest.size()) {
    auto comma = rest.find(',', pos);
    if (comma == std::string::npos) comma = rest.size();
    if (comma > pos) out.values.push_back(std::stod(rest.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Makespan bounds for a parallel file system and for Sea"};
  std::string cluster_file, workload, sweep_text, format = "csv";
  app.add_option("--cluster", cluster_file, "Calibration file, INI or CSV (default: reference cluster)");
  app.add_option("--workload", workload, "n,chunks,F with F the chunk size in MiB")->required();
  app.add_option("--sweep", sweep_text, "param=v1..v2[:step] or param=v1,v2,...");
  app.add_option("--format", format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  bool list = false;
  app.add_flag("--list-parameters", list, "Print the sweepable parameters");
  CLI11_PARSE(app, argc, argv);

  try {
    if (list) {
      for (auto p : model::sweep_parameters()) std::cout << p << "\n";
      return 0;
    }
    auto cal = cluster_file.empty() ? model::reference_calibration() : model::load_calibration(cluster_file);
    auto cluster = model::cluster_from_calibration(cal);

    model::WorkloadParams params;
    double file_size = 0;
    if (std::sscanf(workload.c_str(), "%d,%ld,%lf", &params.iterations, &params.chunks, &file_size) != 3)
      throw std::invalid_argument("--workload expects n,chunks,F");
    cluster.file_size = file_size;
    cluster.validate();

    SweepArg sweep{"iterations", {double(params.iterations)}};
    if (!sweep_text.empty()) sweep = parse_sweep(sweep_text);
    auto points = model::sweep(sweep.parameter, sweep.values, cluster, params);
    std::cout << (format == "json" ? model::sweep_json(sweep.parameter, points)
                                   : model::sweep_csv(sweep.parameter, points));
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "sea-model: " << e.what() << "\n";
    return 1;
  }
}
