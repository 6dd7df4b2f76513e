#include <CLI11.hpp>

#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include "strokeshift/commands.hpp"
#include "strokeshift/errors.hpp"

namespace fs = std::filesystem;
using namespace strokeshift;

int main(int argc, char** argv) {
  CLI::App app{"Progressive stroke-illusion sketch optimizer"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  auto* optimize = app.add_subcommand("optimize", "Run a joint optimization from a JSON config");
  optimize->add_option("config", config_path, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  optimize->add_option("-o,--output", output_dir, "Override the config's output_dir");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate-config", "Check a run config without running it");
  validate->add_option("config", validate_path, "Run config (JSON)")->required();

  std::string run_dir;
  int fps = 12;
  std::string mode = "stroke-by-stroke";
  std::string frames_dir;
  auto* animate = app.add_subcommand("export-animation", "Write PNG frames of the stroke reveal");
  animate->add_option("run_dir", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  animate->add_option("--fps", fps, "Frames per second (phase-fade: frames per phase)");
  animate->add_option("--mode", mode, "stroke-by-stroke or phase-fade")
      ->check(CLI::IsMember({"stroke-by-stroke", "phase-fade"}));
  animate->add_option("-o,--output", frames_dir, "Frame directory");

  std::string candidates_dir;
  std::string endpoint;
  std::string rank_mode = "metric";
  double min_clip = -std::numeric_limits<double>::infinity();
  double min_ir = -std::numeric_limits<double>::infinity();
  double min_hps = -std::numeric_limits<double>::infinity();
  double temperature = kDefaultSemanticTemperature;
  auto* rank = app.add_subcommand("rank", "Filter and rank candidate runs by metric score");
  rank->add_option("candidates_dir", candidates_dir, "Directory of candidate run directories")
      ->required()
      ->check(CLI::ExistingDirectory);
  rank->add_option("--mode", rank_mode, "Ranking mode")->check(CLI::IsMember({"metric"}));
  rank->add_option("--endpoint", endpoint,
                   std::string("Scoring sidecar URL (env ") + kEndpointEnvVar + " overrides)");
  rank->add_option("--min-clip", min_clip, "Per-phase CLIP threshold");
  rank->add_option("--min-ir", min_ir, "Per-phase ImageReward threshold");
  rank->add_option("--min-hps", min_hps, "Per-phase HPS threshold");
  rank->add_option("--temperature", temperature, "Semantic concealment softmax temperature");

  std::string theta_path;
  std::string render_out;
  int resolution = 512;
  std::optional<std::size_t> strokes;
  auto* render = app.add_subcommand("render", "Render a theta file to PNG or SVG");
  render->add_option("theta", theta_path, "theta_<iter>.json")->required()->check(CLI::ExistingFile);
  render->add_option("-o,--output", render_out, "Output .png or .svg")->required();
  render->add_option("-r,--resolution", resolution, "Pixels per side / SVG viewBox size");
  render->add_option("-n,--strokes", strokes, "Render only the first n strokes");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*optimize) {
      std::optional<fs::path> out;
      if (!output_dir.empty()) out = output_dir;
      const auto result = cmd_optimize(config_path, out, &std::cerr);
      std::cout << result.run_dir.string() << '\n';
    } else if (*validate) {
      const RunConfig cfg = cmd_validate_config(validate_path);
      std::cout << "ok: " << cfg.prompts.size() << " phases, " << cfg.num_strokes << " strokes\n";
    } else if (*animate) {
      std::optional<fs::path> out;
      if (!frames_dir.empty()) out = frames_dir;
      const auto result = cmd_export_animation(run_dir, fps, parse_animation_mode(mode), out);
      std::cout << result.frame_count << " frames in " << result.frame_dir.string() << '\n';
    } else if (*rank) {
      RankOptions options;
      const std::string url = resolve_endpoint_url(endpoint);
      if (!url.empty()) options.endpoint = Endpoint{url};
      options.thresholds = {min_clip, min_ir, min_hps};
      options.temperature = temperature;
      const auto report = cmd_rank(candidates_dir, options);
      std::cout << report.dump(2) << '\n';
    } else if (*render) {
      cmd_render(theta_path, render_out, resolution, strokes);
    }
  } catch (const ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return 2;
  } catch (const TransportError& e) {
    std::cerr << "transport error: " << e.what() << '\n';
    return 3;
  } catch (const ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
