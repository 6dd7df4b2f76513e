#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "strokeshift/geometry.hpp"
#include "strokeshift/guidance.hpp"
#include "strokeshift/optimizer.hpp"

namespace strokeshift {

/// One piece of a local target mask, in canvas units. A prompt's target is the
/// union of its shapes.
struct TargetShape {
  enum class Kind { disk, triangle, png };
  Kind kind = Kind::disk;
  Point2<double> center{0.5, 0.5};
  double radius = 0.0;
  std::array<Point2<double>, 3> vertices{};
  /// PNG path, relative paths resolve against the config file's directory.
  std::string path;
};

struct ProviderConfig {
  enum class Kind { local_target, remote };
  Kind kind = Kind::local_target;
  std::map<std::string, std::vector<TargetShape>> targets;
  std::string endpoint;
  int max_attempts = 5;
  int initial_backoff_ms = 200;
  int timeout_s = 300;
};

/// Everything a run needs; one JSON file per run.
struct RunConfig {
  std::vector<std::string> prompts;
  std::size_t num_strokes = 32;
  std::vector<std::size_t> boundaries{16, 32};
  OptimizeConfig optimize;
  ProviderConfig provider;
  std::string output_dir = "run";
  int preview_resolution = 512;

  PhasePlan plan() const { return {boundaries, prompts}; }
};

/// Parses and validates. Throws ConfigError naming the offending field.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

/// Checks PhasePlan/OptimizeConfig/provider invariants; throws ConfigError.
void validate_run_config(const RunConfig& cfg);

/// Rasterizes a union of shapes into an ink mask (1 inside, 0 outside).
InkImage<double> rasterize_target(const std::vector<TargetShape>& shapes, int resolution,
                                  const std::filesystem::path& base_dir = {});

/// One provider per prompt, built from cfg.provider. Remote providers honor
/// the endpoint environment override.
ProviderMap make_providers(const RunConfig& cfg, const std::filesystem::path& base_dir = {});

Endpoint make_endpoint(const ProviderConfig& provider);

}  // namespace strokeshift
