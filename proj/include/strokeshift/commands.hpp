#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "strokeshift/config.hpp"
#include "strokeshift/optimizer.hpp"
#include "strokeshift/ranking.hpp"

namespace strokeshift {

struct OptimizeResult {
  std::filesystem::path run_dir;
  RunTrace trace;
};

/// Runs the joint optimization described by a config file and writes the run
/// directory: config.json, trace.json, theta_<iter>.json, phase_<i>.svg,
/// phase_<i>.png previews and summary.json.
OptimizeResult cmd_optimize(const std::filesystem::path& config_path,
                            const std::optional<std::filesystem::path>& output_dir = {},
                            std::ostream* log = nullptr);

enum class AnimationMode { stroke_by_stroke, phase_fade };

AnimationMode parse_animation_mode(const std::string& name);

struct AnimationResult {
  std::filesystem::path frame_dir;
  std::size_t frame_count = 0;
};

/// stroke-by-stroke: frame i shows the first i strokes (N frames).
/// phase-fade: `fps` frames per phase, each fading in that phase's subset over
/// the already complete earlier phases (K * fps frames).
/// Frames are frame_%05d.png numbered from 1, plus frames.json.
AnimationResult cmd_export_animation(const std::filesystem::path& run_dir, int fps,
                                     AnimationMode mode,
                                     const std::optional<std::filesystem::path>& out_dir = {});

struct RankOptions {
  std::optional<Endpoint> endpoint;
  MetricThresholds thresholds;
  double temperature = kDefaultSemanticTemperature;
  /// Resolution candidates are rendered at before scoring.
  int score_resolution = 224;
};

/// Ranks every subdirectory of `candidates_dir` and writes ranking.json there.
/// A candidate uses its scores.json when present; otherwise it is rendered and
/// scored through the sidecar (and scores.json is written).
nlohmann::json cmd_rank(const std::filesystem::path& candidates_dir, const RankOptions& options);

/// Renders a theta file to .png or .svg (chosen by extension). `stroke_count`
/// limits rendering to the first strokes.
void cmd_render(const std::filesystem::path& theta_path, const std::filesystem::path& out_path,
                int resolution, std::optional<std::size_t> stroke_count = {});

/// Parses and validates; throws ConfigError on the first problem.
RunConfig cmd_validate_config(const std::filesystem::path& config_path);

/// Phase/delta scores for one candidate, read from scores.json.
CandidateScores read_scores(const std::filesystem::path& path, const std::string& id);

}  // namespace strokeshift
