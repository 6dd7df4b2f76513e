#include "strokeshift/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "strokeshift/errors.hpp"
#include "strokeshift/png_io.hpp"
#include "strokeshift/raster.hpp"
#include "strokeshift/svg.hpp"
#include "strokeshift/trace_io.hpp"

namespace strokeshift {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractViolation("cannot open " + path.string());
  json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) throw ContractViolation(path.string() + " is not valid JSON");
  return doc;
}

RenderConfig preview_render_config(const RunConfig& cfg) {
  RenderConfig preview = RenderConfig::at_resolution(cfg.preview_resolution);
  preview.samples_per_curve = cfg.optimize.render.samples_per_curve;
  return preview;
}

std::string frame_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%05zu.png", index);
  return buf;
}

json triple_json(const MetricTriple& m) { return {{"clip", m.clip}, {"ir", m.ir}, {"hps", m.hps}}; }

MetricTriple triple_from_json(const json& doc) {
  return {doc.at("clip").get<double>(), doc.at("ir").get<double>(), doc.at("hps").get<double>()};
}

json threshold_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

/// Scores a run directory through the sidecar and returns the scores.json document.
json score_candidate(const fs::path& dir, const Endpoint& endpoint, int resolution) {
  const RunConfig cfg = parse_run_config(read_json_file(dir / "config.json"));
  const Strokes strokes = read_theta(final_theta_path(dir));
  const PhasePlan plan = cfg.plan();
  plan.validate(strokes.size());
  RenderConfig render = RenderConfig::at_resolution(resolution);
  render.samples_per_curve = cfg.optimize.render.samples_per_curve;

  const std::size_t phases = plan.phase_count();
  json phase = json::array();
  json delta = json::array();
  json similarity = json::array();
  for (std::size_t i = 1; i <= phases; ++i) {
    const auto image = strokeshift::render(cumulative_subset(strokes, plan, i), render);
    const auto scores = remote_score(image, plan.prompts, endpoint);
    similarity.push_back(scores.clip);
    phase.push_back(triple_json({scores.clip[i - 1], scores.image_reward[i - 1], scores.hps[i - 1]}));
  }
  for (std::size_t i = 2; i <= phases; ++i) {
    const auto image = strokeshift::render(phase_subset(strokes, plan, i), render);
    const std::vector<std::string> prompt{plan.prompts[i - 1]};
    const auto scores = remote_score(image, prompt, endpoint);
    delta.push_back(triple_json({scores.clip[0], scores.image_reward[0], scores.hps[0]}));
  }
  return {{"phase", phase}, {"delta", delta}, {"similarity", similarity}};
}

}  // namespace

OptimizeResult cmd_optimize(const fs::path& config_path, const std::optional<fs::path>& output_dir,
                            std::ostream* log) {
  const RunConfig cfg = load_run_config(config_path);
  const fs::path run_dir = output_dir ? *output_dir : fs::path(cfg.output_dir);
  const PhasePlan plan = cfg.plan();
  const ProviderMap providers = make_providers(cfg, config_path.parent_path());

  fs::create_directories(run_dir);
  write_text(run_dir / "config.json", to_json(cfg).dump(2) + "\n");

  IterationCallback progress;
  if (log != nullptr) {
    progress = [&](int it, const Strokes&) {
      if (it % cfg.optimize.snapshot_every == 0 || it == cfg.optimize.iterations) {
        *log << "iteration " << it << "/" << cfg.optimize.iterations << '\n';
      }
    };
  }
  OptimizeResult result{run_dir, optimize(plan, providers, cfg.optimize, progress)};
  write_run_trace(run_dir, result.trace, plan);

  const Strokes& final_theta = result.trace.final_theta;
  const RenderConfig preview = preview_render_config(cfg);
  SvgStyle style;
  style.canvas_size = cfg.preview_resolution;
  json phases = json::array();
  for (std::size_t i = 1; i <= plan.phase_count(); ++i) {
    const auto view = cumulative_subset(final_theta, plan, i);
    const std::string stem = "phase_" + std::to_string(i);
    write_text(run_dir / (stem + ".svg"), export_svg(view, style));
    write_ink_png(run_dir / (stem + ".png"), render(view, preview));
    phases.push_back({{"prompt", plan.prompts[i - 1]},
                      {"strokes", plan.subset_end(i)},
                      {"svg", stem + ".svg"},
                      {"png", stem + ".png"}});
  }
  const auto& last = result.trace.snapshots.back();
  const json summary = {{"final_iteration", last.iteration},
                        {"final_theta", final_theta_path(run_dir).filename().string()},
                        {"branch_diag", last.branch_diag},
                        {"overlay", last.overlay},
                        {"total_loss", last.total_loss},
                        {"phases", phases}};
  write_text(run_dir / "summary.json", summary.dump(2) + "\n");
  return result;
}

AnimationMode parse_animation_mode(const std::string& name) {
  if (name == "stroke-by-stroke") return AnimationMode::stroke_by_stroke;
  if (name == "phase-fade") return AnimationMode::phase_fade;
  throw ContractViolation("unknown animation mode '" + name +
                          "' (expected stroke-by-stroke or phase-fade)");
}

AnimationResult cmd_export_animation(const fs::path& run_dir, int fps, AnimationMode mode,
                                     const std::optional<fs::path>& out_dir) {
  if (fps < 1) throw ContractViolation("export-animation: fps must be >= 1");
  const Strokes strokes = read_theta(final_theta_path(run_dir));
  RunConfig cfg;
  if (fs::exists(run_dir / "config.json")) {
    cfg = parse_run_config(read_json_file(run_dir / "config.json"));
  } else if (mode == AnimationMode::phase_fade) {
    throw ContractViolation("export-animation: phase-fade needs config.json in the run directory");
  }
  const RenderConfig preview = preview_render_config(cfg);
  const std::string mode_name = mode == AnimationMode::stroke_by_stroke ? "stroke-by-stroke"
                                                                        : "phase-fade";
  AnimationResult result;
  result.frame_dir = out_dir ? *out_dir : run_dir / ("frames_" + mode_name);
  fs::create_directories(result.frame_dir);

  if (mode == AnimationMode::stroke_by_stroke) {
    for (std::size_t i = 1; i <= strokes.size(); ++i) {
      write_ink_png(result.frame_dir / frame_name(i), render(strokes.slice(0, i), preview));
    }
    result.frame_count = strokes.size();
  } else {
    const PhasePlan plan = cfg.plan();
    plan.validate(strokes.size());
    std::size_t index = 0;
    for (std::size_t phase = 1; phase <= plan.phase_count(); ++phase) {
      for (int f = 1; f <= fps; ++f) {
        Strokes frame(std::vector<CubicBezier<double>>(
            strokes.strokes().begin(),
            strokes.strokes().begin() + static_cast<std::ptrdiff_t>(plan.subset_end(phase))));
        const double fade = static_cast<double>(f) / fps;
        for (std::size_t s = plan.subset_begin(phase); s < plan.subset_end(phase); ++s) {
          frame[s].opacity *= fade;
        }
        write_ink_png(result.frame_dir / frame_name(++index), render(frame.view(), preview));
      }
    }
    result.frame_count = index;
  }
  const json manifest = {{"fps", fps},
                         {"mode", mode_name},
                         {"frame_count", result.frame_count},
                         {"pattern", "frame_%05d.png"}};
  write_text(result.frame_dir / "frames.json", manifest.dump(2) + "\n");
  return result;
}

CandidateScores read_scores(const fs::path& path, const std::string& id) {
  const json doc = read_json_file(path);
  try {
    CandidateScores scores;
    scores.id = id;
    for (const auto& p : doc.at("phase")) scores.phase.push_back(triple_from_json(p));
    for (const auto& d : doc.at("delta")) scores.delta.push_back(triple_from_json(d));
    return scores;
  } catch (const json::exception& e) {
    throw ContractViolation(path.string() + ": malformed scores: " + e.what());
  }
}

json cmd_rank(const fs::path& candidates_dir, const RankOptions& options) {
  if (!fs::is_directory(candidates_dir)) {
    throw ContractViolation("rank: " + candidates_dir.string() + " is not a directory");
  }
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(candidates_dir)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());

  std::vector<CandidateScores> candidates;
  std::map<std::string, json> documents;
  for (const auto& dir : dirs) {
    const std::string id = dir.filename().string();
    const fs::path scores_path = dir / "scores.json";
    if (!fs::exists(scores_path)) {
      if (!options.endpoint) {
        throw ContractViolation("rank: candidate '" + id +
                                "' has no scores.json and no scoring endpoint was given");
      }
      write_text(scores_path,
                 score_candidate(dir, *options.endpoint, options.score_resolution).dump(2) + "\n");
    }
    documents[id] = read_json_file(scores_path);
    candidates.push_back(read_scores(scores_path, id));
  }

  const RankingReport report = rank_candidates(candidates, options.thresholds);
  json ranked = json::array();
  for (const auto& entry : report.ranked) {
    const auto& c = *std::find_if(candidates.begin(), candidates.end(),
                                  [&](const CandidateScores& s) { return s.id == entry.id; });
    double clip_min = c.phase.front().clip;
    for (const auto& p : c.phase) clip_min = std::min(clip_min, p.clip);
    const MetricTriple& full = c.phase.back();
    const MetricTriple& last_delta = c.delta.back();
    json item = {{"id", entry.id},
                 {"R", entry.score.r},
                 {"S_CLIP", entry.score.s_clip},
                 {"S_IR", entry.score.s_ir},
                 {"S_HPS", entry.score.s_hps},
                 {"clip_min", clip_min},
                 {"structural_concealment",
                  {{"clip", structural_concealment(full.clip, last_delta.clip)},
                   {"ir", structural_concealment(full.ir, last_delta.ir)},
                   {"hps", structural_concealment(full.hps, last_delta.hps)}}}};
    const json& doc = documents[entry.id];
    if (doc.contains("similarity")) {
      const auto rows = doc["similarity"].get<std::vector<std::vector<double>>>();
      Eigen::MatrixXd sim(rows.size(), rows.empty() ? 0 : rows.front().size());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != static_cast<std::size_t>(sim.cols())) {
          throw ContractViolation("rank: ragged similarity matrix for '" + entry.id + "'");
        }
        for (std::size_t k = 0; k < rows[r].size(); ++k) sim(r, k) = rows[r][k];
      }
      item["semantic_concealment"] = semantic_concealment(sim, options.temperature);
    }
    ranked.push_back(item);
  }
  json excluded = json::array();
  for (const auto& e : report.excluded) excluded.push_back({{"id", e.id}, {"reason", e.reason}});

  const json out = {{"mode", "metric"},
                    {"thresholds",
                     {{"clip", threshold_json(options.thresholds.clip)},
                      {"ir", threshold_json(options.thresholds.ir)},
                      {"hps", threshold_json(options.thresholds.hps)}}},
                    {"temperature", options.temperature},
                    {"ranked", ranked},
                    {"excluded", excluded}};
  write_text(candidates_dir / "ranking.json", out.dump(2) + "\n");
  return out;
}

void cmd_render(const fs::path& theta_path, const fs::path& out_path, int resolution,
                std::optional<std::size_t> stroke_count) {
  const Strokes strokes = read_theta(theta_path);
  const std::size_t count = stroke_count ? std::min(*stroke_count, strokes.size()) : strokes.size();
  const auto view = strokes.slice(0, count);
  if (out_path.extension() == ".svg") {
    SvgStyle style;
    style.canvas_size = resolution;
    write_text(out_path, export_svg(view, style));
  } else if (out_path.extension() == ".png") {
    write_ink_png(out_path, render(view, RenderConfig::at_resolution(resolution)));
  } else {
    throw ContractViolation("render: output must end in .png or .svg");
  }
}

RunConfig cmd_validate_config(const fs::path& config_path) { return load_run_config(config_path); }

}  // namespace strokeshift
