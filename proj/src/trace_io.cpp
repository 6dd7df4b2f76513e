#include "strokeshift/trace_io.hpp"

#include <fstream>
#include <regex>

#include "strokeshift/errors.hpp"

namespace strokeshift {

using nlohmann::json;

namespace {

void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

std::string theta_file_name(int iteration) {
  return "theta_" + std::to_string(iteration) + ".json";
}

}  // namespace

json theta_to_json(const Strokes& strokes) {
  json list = json::array();
  for (const auto& curve : strokes.strokes()) {
    json points = json::array();
    for (const auto& p : curve.points) points.push_back({p.x(), p.y()});
    list.push_back({{"points", points}, {"width", curve.width}, {"opacity", curve.opacity}});
  }
  return {{"learnable", {{"width", strokes.mask().width}, {"opacity", strokes.mask().opacity}}},
          {"strokes", list}};
}

Strokes theta_from_json(const json& doc) {
  try {
    LearnableMask mask;
    if (doc.contains("learnable")) {
      mask.width = doc.at("learnable").value("width", false);
      mask.opacity = doc.at("learnable").value("opacity", false);
    }
    std::vector<CubicBezier<double>> strokes;
    for (const auto& item : doc.at("strokes")) {
      CubicBezier<double> curve;
      const auto& points = item.at("points");
      if (points.size() != 4) throw ContractViolation("theta: stroke needs four points");
      for (std::size_t i = 0; i < 4; ++i) {
        curve.points[i] = {points[i].at(0).get<double>(), points[i].at(1).get<double>()};
      }
      curve.width = item.value("width", kDefaultStrokeWidth);
      curve.opacity = item.value("opacity", kDefaultStrokeOpacity);
      if (!curve.is_valid()) throw ContractViolation("theta: stroke parameters out of range");
      strokes.push_back(curve);
    }
    return Strokes(std::move(strokes), mask);
  } catch (const json::exception& e) {
    throw ContractViolation(std::string("theta: malformed document: ") + e.what());
  }
}

void write_theta(const std::filesystem::path& path, const Strokes& strokes) {
  write_json(path, theta_to_json(strokes));
}

Strokes read_theta(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractViolation("cannot open theta file " + path.string());
  const json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) throw ContractViolation(path.string() + " is not valid JSON");
  return theta_from_json(doc);
}

void write_run_trace(const std::filesystem::path& run_dir, const RunTrace& trace,
                     const PhasePlan& plan) {
  std::filesystem::create_directories(run_dir);
  json snapshots = json::array();
  for (const auto& snap : trace.snapshots) {
    const std::string file = theta_file_name(snap.iteration);
    write_theta(run_dir / file, snap.theta);
    snapshots.push_back({{"iteration", snap.iteration},
                         {"total_loss", snap.total_loss},
                         {"branch_diag", snap.branch_diag},
                         {"overlay", snap.overlay},
                         {"theta_file", file}});
  }
  const int final_iteration = trace.snapshots.empty() ? 0 : trace.snapshots.back().iteration;
  write_json(run_dir / "trace.json", {{"prompts", plan.prompts},
                                      {"boundaries", plan.boundaries},
                                      {"final_iteration", final_iteration},
                                      {"snapshots", snapshots}});
}

std::filesystem::path final_theta_path(const std::filesystem::path& run_dir) {
  const std::regex name("theta_(\\d+)\\.json");
  std::filesystem::path best;
  long best_iteration = -1;
  if (std::filesystem::is_directory(run_dir)) {
    for (const auto& entry : std::filesystem::directory_iterator(run_dir)) {
      const std::string file = entry.path().filename().string();
      std::smatch match;
      if (std::regex_match(file, match, name)) {
        const long iteration = std::stol(match[1]);
        if (iteration > best_iteration) {
          best_iteration = iteration;
          best = entry.path();
        }
      }
    }
  }
  if (best_iteration < 0) {
    throw ContractViolation("no theta_<iteration>.json in " + run_dir.string());
  }
  return best;
}

}  // namespace strokeshift
