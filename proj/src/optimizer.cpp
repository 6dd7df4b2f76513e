#include "strokeshift/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <span>

#include "strokeshift/errors.hpp"

namespace strokeshift {

namespace {

/// Step bound between consecutive control points at initialization, canvas units.
constexpr double kInitWalkStep = 0.05;
/// Learnable widths are kept above this after each update.
constexpr double kMinStrokeWidth = 1e-4;

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Point2<double> uniform_in_disk(std::mt19937_64& rng, const Point2<double>& center, double radius) {
  const double r = radius * std::sqrt(uniform01(rng));
  const double angle = 2.0 * std::numbers::pi * uniform01(rng);
  return center + r * Point2<double>(std::cos(angle), std::sin(angle));
}

struct InitRegion {
  bool square = false;
  Point2<double> center{0.5, 0.5};
  double radius = 0.0;

  Point2<double> sample(std::mt19937_64& rng) const {
    if (square) return {uniform01(rng), uniform01(rng)};
    return uniform_in_disk(rng, center, radius);
  }

  /// Inside the region grown by the walk step.
  bool admits(const Point2<double>& p) const {
    if (square) {
      return p.x() >= -kInitWalkStep && p.x() <= 1.0 + kInitWalkStep && p.y() >= -kInitWalkStep &&
             p.y() <= 1.0 + kInitWalkStep;
    }
    return (p - center).norm() <= radius + kInitWalkStep;
  }
};

double distance_to_canvas(const Point2<double>& p) {
  const double dx = std::max({0.0 - p.x(), 0.0, p.x() - 1.0});
  const double dy = std::max({0.0 - p.y(), 0.0, p.y() - 1.0});
  return std::hypot(dx, dy);
}

void check_finite_image(const Image& grad, std::size_t phase, const std::string& prompt) {
  if (!grad.allFinite()) {
    throw NonFiniteError("non-finite guidance gradient from branch " + std::to_string(phase) +
                         " (prompt '" + prompt + "')");
  }
}

Theta learning_rates(const Strokes& strokes, const OptimizeConfig& cfg) {
  const LearnableMask& mask = strokes.mask();
  const int stride = mask.params_per_stroke();
  Theta rates(strokes.param_count());
  for (std::size_t s = 0; s < strokes.size(); ++s) {
    auto block = rates.segment(static_cast<Eigen::Index>(s) * stride, stride);
    block.head<8>().setConstant(cfg.learning_rate);
    int k = 8;
    if (mask.width) block[k++] = cfg.width_learning_rate;
    if (mask.opacity) block[k++] = cfg.opacity_learning_rate;
  }
  return rates;
}

void project_to_valid(Strokes& strokes) {
  for (auto& curve : strokes.strokes()) {
    curve.width = std::max(curve.width, kMinStrokeWidth);
    curve.opacity = std::clamp(curve.opacity, 0.0, 1.0);
  }
}

}  // namespace

std::string to_string(InitStrategy strategy) {
  switch (strategy) {
    case InitStrategy::scattered:
      return "scattered";
    case InitStrategy::centered:
      return "centered";
    case InitStrategy::shifted:
      return "shifted";
  }
  return "centered";
}

InitStrategy parse_init_strategy(const std::string& name) {
  if (name == "scattered") return InitStrategy::scattered;
  if (name == "centered") return InitStrategy::centered;
  if (name == "shifted") return InitStrategy::shifted;
  throw ContractViolation("unknown init strategy '" + name +
                          "' (expected scattered, centered or shifted)");
}

void OptimizeConfig::validate(std::size_t phase_count) const {
  if (iterations < 1) throw ContractViolation("optimize.iterations must be >= 1");
  if (!(learning_rate > 0.0)) throw ContractViolation("optimize.learning_rate must be > 0");
  if (!(width_learning_rate > 0.0) || !(opacity_learning_rate > 0.0)) {
    throw ContractViolation("optimize width/opacity learning rates must be > 0");
  }
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) {
    throw ContractViolation("optimize.adam_beta1 must lie in [0, 1)");
  }
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ContractViolation("optimize.adam_beta2 must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ContractViolation("optimize.adam_eps must be > 0");
  if (!(init_radius > 0.0)) throw ContractViolation("optimize.init_radius must be > 0");
  if (!(guidance_scale > 0.0)) throw ContractViolation("optimize.guidance_scale must be > 0");
  if (snapshot_every < 1) throw ContractViolation("optimize.snapshot_every must be >= 1");
  if (!(stroke_width > 0.0)) throw ContractViolation("optimize.stroke_width must be > 0");
  if (!(stroke_opacity >= 0.0 && stroke_opacity <= 1.0)) {
    throw ContractViolation("optimize.stroke_opacity must lie in [0, 1]");
  }
  render.validate();
  overlay.validate(phase_count);
}

Strokes init_strokes(std::size_t n, const PhasePlan& plan, const OptimizeConfig& cfg) {
  if (n < plan.phase_count()) {
    throw ContractViolation("init_strokes: need at least one stroke per phase");
  }
  InitRegion region;
  switch (cfg.init_strategy) {
    case InitStrategy::scattered:
      region.square = true;
      break;
    case InitStrategy::centered:
      region.radius = cfg.init_radius;
      break;
    case InitStrategy::shifted:
      region.center += cfg.init_offset;
      region.radius = cfg.init_radius;
      if (distance_to_canvas(region.center) >= region.radius) {
        throw ContractViolation("init_strokes: shifted disk lies entirely outside the canvas");
      }
      break;
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<CubicBezier<double>> strokes(n);
  for (auto& curve : strokes) {
    curve.points[0] = region.sample(rng);
    for (int i = 1; i < 4; ++i) {
      Point2<double> next;
      do {
        next = uniform_in_disk(rng, curve.points[i - 1], kInitWalkStep);
      } while (!region.admits(next));
      curve.points[i] = next;
    }
    curve.width = cfg.stroke_width;
    curve.opacity = cfg.stroke_opacity;
  }
  return Strokes(std::move(strokes), cfg.learnable);
}

bool TermSelection::has_branch(std::size_t phase) const {
  return branches.empty() || std::find(branches.begin(), branches.end(), phase) != branches.end();
}

bool TermSelection::has_overlay(std::size_t boundary) const {
  return include_overlay && (!overlay_boundary || *overlay_boundary == boundary);
}

ObjectiveEvaluation evaluate_objective(const Strokes& strokes, const PhasePlan& plan,
                                       const ProviderMap& providers, const OptimizeConfig& cfg,
                                       std::int64_t step, const TermSelection& terms) {
  plan.validate(strokes.size());
  const std::size_t phases = plan.phase_count();
  const RenderConfig& rcfg = cfg.render;
  const int res = rcfg.resolution;

  const auto patches = coverage_patches(strokes.view(), rcfg);
  const std::span<const CoveragePatch<double>> all(patches);
  auto cumulative_patches = [&](std::size_t phase) {
    return all.first(plan.subset_end(phase));
  };
  auto subset_patches = [&](std::size_t phase) {
    return all.subspan(plan.subset_begin(phase), plan.subset_end(phase) - plan.subset_begin(phase));
  };

  std::vector<Image> cumulative;
  cumulative.reserve(phases);
  for (std::size_t i = 1; i <= phases; ++i) {
    cumulative.push_back(composite<double>(cumulative_patches(i), res));
  }

  ObjectiveEvaluation eval;
  std::vector<double> branch_losses(phases, 0.0);
  std::vector<Image> branch_grads(phases);
  for (std::size_t i = 1; i <= phases; ++i) {
    const std::string& prompt = plan.prompts[i - 1];
    const auto provider = providers.find(prompt);
    if (provider == providers.end() || !provider->second) {
      throw ContractViolation("no guidance provider for prompt '" + prompt + "'");
    }
    if (!terms.has_branch(i)) {
      eval.branch_diag.push_back(0.0);
      branch_grads[i - 1] = Image::Zero(res, res);
      continue;
    }
    GuidanceRequest request{i - 1, step, prompt, cumulative[i - 1], cfg.guidance_scale};
    GuidanceResponse response = provider->second->gradient(request);
    if (response.grad_image.rows() != res || response.grad_image.cols() != res) {
      throw ProtocolError("guidance gradient for branch " + std::to_string(i) +
                          " has the wrong shape");
    }
    check_finite_image(response.grad_image, i, prompt);
    eval.branch_diag.push_back(response.scalar_diag);
    branch_losses[i - 1] = response.scalar_diag;
    branch_grads[i - 1] = std::move(response.grad_image);
  }

  std::vector<OverlayResult<double>> overlay_terms(phases - 1);
  for (std::size_t b = 0; b + 1 < phases; ++b) {
    const Image next_subset = composite<double>(subset_patches(b + 2), res);
    auto term = overlay_loss(cumulative[b], next_subset, cfg.overlay);
    eval.overlay.push_back(term.value);
    if (terms.has_overlay(b) && cfg.overlay.lambda_at(b) > 0.0) {
      overlay_terms[b] = std::move(term);
    }
  }

  const auto total = total_loss<double>(branch_losses, branch_grads, overlay_terms, cfg.overlay);
  eval.total_loss = total.value;
  if (!std::isfinite(eval.total_loss)) throw NonFiniteError("non-finite total loss");

  eval.grad = Theta::Zero(strokes.param_count());
  for (std::size_t i = 1; i <= phases; ++i) {
    accumulate_render_vjp<double>(cumulative_subset(strokes, plan, i), rcfg,
                                  total.cumulative_grads[i - 1], cumulative_patches(i), eval.grad);
  }
  for (std::size_t b = 0; b + 1 < phases; ++b) {
    if (total.subset_grads[b].size() == 0) continue;
    accumulate_render_vjp<double>(phase_subset(strokes, plan, b + 2), rcfg, total.subset_grads[b],
                                  subset_patches(b + 2), eval.grad);
  }
  return eval;
}

RunTrace optimize_from(Strokes strokes, const PhasePlan& plan, const ProviderMap& providers,
                       const OptimizeConfig& cfg, const IterationCallback& on_iteration) {
  plan.validate(strokes.size());
  cfg.validate(plan.phase_count());
  for (const auto& prompt : plan.prompts) {
    if (!providers.contains(prompt)) {
      throw ContractViolation("no guidance provider for prompt '" + prompt + "'");
    }
  }

  RunTrace trace;
  Theta theta = strokes.flatten();
  const Theta rates = learning_rates(strokes, cfg);
  auto state = AdamState<double>::zeros(theta.size());

  for (int it = 1; it <= cfg.iterations; ++it) {
    const auto eval = evaluate_objective(strokes, plan, providers, cfg, it - 1);
    adam_step(theta, eval.grad, rates, state, cfg.adam);
    strokes.unflatten(theta);
    project_to_valid(strokes);
    theta = strokes.flatten();

    if (it % cfg.snapshot_every == 0 || it == cfg.iterations) {
      trace.snapshots.push_back({it, strokes, eval.branch_diag, eval.overlay, eval.total_loss});
    }
    if (on_iteration) on_iteration(it, strokes);
  }
  trace.final_theta = std::move(strokes);
  return trace;
}

RunTrace optimize(const PhasePlan& plan, const ProviderMap& providers, const OptimizeConfig& cfg,
                  const IterationCallback& on_iteration) {
  cfg.validate(plan.phase_count());
  return optimize_from(init_strokes(plan.stroke_count(), plan, cfg), plan, providers, cfg,
                       on_iteration);
}

}  // namespace strokeshift
