#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "strokeshift/adam.hpp"
#include "strokeshift/geometry.hpp"
#include "strokeshift/guidance.hpp"
#include "strokeshift/losses.hpp"
#include "strokeshift/raster.hpp"

namespace strokeshift {

using Strokes = StrokeSet<double>;
using Theta = ParamVector<double>;

enum class InitStrategy { scattered, centered, shifted };

std::string to_string(InitStrategy strategy);
/// Throws ContractViolation for unknown names.
InitStrategy parse_init_strategy(const std::string& name);

struct OptimizeConfig {
  int iterations = 2000;
  /// Adam step size for control points, canvas units.
  double learning_rate = 0.4 / 224.0;
  double width_learning_rate = 0.01;
  double opacity_learning_rate = 0.01;
  AdamConfig adam;
  std::uint64_t seed = 0;

  InitStrategy init_strategy = InitStrategy::centered;
  double init_radius = 0.2;
  Point2<double> init_offset{0.15, 0.15};

  double guidance_scale = 100.0;
  RenderConfig render;
  OverlayConfig overlay;
  int snapshot_every = 100;

  LearnableMask learnable;
  double stroke_width = kDefaultStrokeWidth;
  double stroke_opacity = kDefaultStrokeOpacity;

  void validate(std::size_t phase_count) const;
};

struct Snapshot {
  int iteration = 0;
  Strokes theta;
  std::vector<double> branch_diag;
  std::vector<double> overlay;
  double total_loss = 0.0;
};

struct RunTrace {
  std::vector<Snapshot> snapshots;
  Strokes final_theta;
};

/// Short random-walk strokes placed by `cfg.init_strategy`. Deterministic in cfg.seed.
Strokes init_strokes(std::size_t n, const PhasePlan& plan, const OptimizeConfig& cfg);

/// One evaluation of the joint objective and its gradient w.r.t. theta.
struct ObjectiveEvaluation {
  double total_loss = 0.0;
  std::vector<double> branch_diag;
  std::vector<double> overlay;
  Theta grad;
};

/// Which terms contribute to an evaluation; the default is everything.
struct TermSelection {
  /// Empty means all branches; otherwise only the listed 1-based phases.
  std::vector<std::size_t> branches;
  bool include_overlay = true;
  /// Only this 0-based boundary's overlay term, when set.
  std::optional<std::size_t> overlay_boundary;

  bool has_branch(std::size_t phase) const;
  bool has_overlay(std::size_t boundary) const;
};

/// Renders every cumulative branch and every subset S_{i+1} needed by the
/// overlay terms, queries guidance per branch (in branch order), and chains all
/// image gradients back through the rasterizer.
ObjectiveEvaluation evaluate_objective(const Strokes& strokes, const PhasePlan& plan,
                                       const ProviderMap& providers, const OptimizeConfig& cfg,
                                       std::int64_t step, const TermSelection& terms = {});

/// Called after every iteration with (iteration, strokes after the update).
using IterationCallback = std::function<void(int, const Strokes&)>;

RunTrace optimize(const PhasePlan& plan, const ProviderMap& providers, const OptimizeConfig& cfg,
                  const IterationCallback& on_iteration = {});

/// Same loop from a given starting theta.
RunTrace optimize_from(Strokes strokes, const PhasePlan& plan, const ProviderMap& providers,
                       const OptimizeConfig& cfg, const IterationCallback& on_iteration = {});

}  // namespace strokeshift
