#include <doctest.h>

#include <limits>
#include <memory>

#include "strokeshift/errors.hpp"
#include "strokeshift/optimizer.hpp"
#include "test_support.hpp"

using namespace strokeshift;

namespace {

constexpr int kRes = 32;

class ZeroProvider final : public GuidanceProvider {
 public:
  GuidanceResponse gradient(const GuidanceRequest& req) override {
    return {Image::Zero(req.image.rows(), req.image.cols()), 0.0, "zero"};
  }
};

class NanProvider final : public GuidanceProvider {
 public:
  GuidanceResponse gradient(const GuidanceRequest& req) override {
    Image g = Image::Zero(req.image.rows(), req.image.cols());
    g(3, 3) = std::numeric_limits<double>::quiet_NaN();
    return {g, 0.0, "nan"};
  }
};

OptimizeConfig small_config() {
  OptimizeConfig cfg;
  cfg.render = RenderConfig::at_resolution(kRes);
  cfg.overlay.blur_sigma = 1.0;
  cfg.overlay.lambda_overlay = {0.5};
  cfg.stroke_width = 0.02;
  cfg.learning_rate = 0.01;
  cfg.iterations = 20;
  cfg.snapshot_every = 5;
  return cfg;
}

PhasePlan plan3() { return PhasePlan{{2, 4, 6}, {"a", "b", "c"}}; }

ProviderMap random_targets(const PhasePlan& plan, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ProviderMap providers;
  for (const auto& p : plan.prompts) {
    providers[p] = std::make_shared<TargetMatchProvider>(testing::random_image(rng, kRes, kRes));
  }
  return providers;
}

ProviderMap zero_providers(const PhasePlan& plan) {
  ProviderMap providers;
  for (const auto& p : plan.prompts) providers[p] = std::make_shared<ZeroProvider>();
  return providers;
}

Strokes spread_strokes(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto set = testing::random_strokes(rng, n, {true, true});
  return set;
}

}  // namespace

TEST_CASE("centered init keeps every control point within radius + walk slack") {
  const PhasePlan plan{{16, 32}, {"a", "b"}};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    OptimizeConfig cfg;
    cfg.seed = seed;
    const auto set = init_strokes(32, plan, cfg);
    for (const auto& c : set.strokes()) {
      for (const auto& p : c.points) CHECK((p - Point2<double>(0.5, 0.5)).norm() <= 0.25);
      for (int i = 1; i < 4; ++i) CHECK((c.points[i] - c.points[i - 1]).norm() <= 0.05);
      CHECK(c.width == kDefaultStrokeWidth);
      CHECK(c.opacity == kDefaultStrokeOpacity);
    }
  }
}

TEST_CASE("init is deterministic in the seed") {
  const PhasePlan plan{{3, 6}, {"a", "b"}};
  OptimizeConfig cfg;
  cfg.init_strategy = InitStrategy::scattered;
  cfg.seed = 7;
  CHECK(init_strokes(6, plan, cfg) == init_strokes(6, plan, cfg));
  OptimizeConfig other = cfg;
  other.seed = 8;
  CHECK_FALSE(init_strokes(6, plan, cfg) == init_strokes(6, plan, other));
}

TEST_CASE("scattered init has start points centered on the canvas") {
  const PhasePlan plan{{5000, 10000}, {"a", "b"}};
  OptimizeConfig cfg;
  cfg.init_strategy = InitStrategy::scattered;
  cfg.seed = 3;
  const auto set = init_strokes(10000, plan, cfg);
  Point2<double> mean = Point2<double>::Zero();
  for (const auto& c : set.strokes()) {
    mean += c.points[0];
    CHECK(c.points[0].minCoeff() >= 0.0);
    CHECK(c.points[0].maxCoeff() < 1.0);
  }
  mean /= 10000.0;
  CHECK((mean - Point2<double>(0.5, 0.5)).cwiseAbs().maxCoeff() <= 0.05);
}

TEST_CASE("shifted init moves the disk and rejects an off-canvas disk") {
  const PhasePlan plan{{4, 8}, {"a", "b"}};
  OptimizeConfig cfg;
  cfg.init_strategy = InitStrategy::shifted;
  const Point2<double> center(0.65, 0.65);
  const auto shifted = init_strokes(8, plan, cfg);
  for (const auto& c : shifted.strokes()) {
    for (const auto& p : c.points) CHECK((p - center).norm() <= 0.25);
  }
  cfg.init_offset = {0.9, 0.0};
  CHECK_THROWS_AS(init_strokes(8, plan, cfg), ContractViolation);
  cfg.init_offset = {0.6, 0.0};  // partly on canvas
  CHECK_NOTHROW(init_strokes(8, plan, cfg));
  CHECK_THROWS_AS(init_strokes(1, plan, cfg), ContractViolation);
}

TEST_CASE("init strategy names") {
  for (auto s : {InitStrategy::scattered, InitStrategy::centered, InitStrategy::shifted}) {
    CHECK(parse_init_strategy(to_string(s)) == s);
  }
  CHECK_THROWS_AS(parse_init_strategy("random"), ContractViolation);
}

TEST_CASE("OptimizeConfig validation") {
  OptimizeConfig cfg;
  CHECK_NOTHROW(cfg.validate(2));
  cfg.iterations = 0;
  CHECK_THROWS_AS(cfg.validate(2), ContractViolation);
  cfg = OptimizeConfig{};
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(2), ContractViolation);
  cfg = OptimizeConfig{};
  cfg.adam.beta1 = 1.0;
  CHECK_THROWS_AS(cfg.validate(2), ContractViolation);
  cfg = OptimizeConfig{};
  cfg.adam.beta2 = -0.1;
  CHECK_THROWS_AS(cfg.validate(2), ContractViolation);
}

TEST_CASE("delta strokes get no gradient from branches that do not render them") {
  const auto plan = plan3();
  const auto strokes = spread_strokes(6, 1);
  const auto providers = random_targets(plan, 2);
  const auto cfg = small_config();
  const int stride = strokes.mask().params_per_stroke();
  for (std::size_t i = 1; i <= 3; ++i) {
    TermSelection only{{i}, false, {}};
    const auto g = evaluate_objective(strokes, plan, providers, cfg, 0, only).grad;
    const auto rendered = static_cast<Eigen::Index>(plan.subset_end(i)) * stride;
    CHECK_FALSE(g.head(rendered).isZero(0.0));
    CHECK(g.tail(g.size() - rendered).isZero(0.0));
  }
}

TEST_CASE("with the full-branch guidance zeroed, delta gradients come only from the overlay term") {
  const PhasePlan plan{{3, 6}, {"prefix", "full"}};
  const auto strokes = spread_strokes(6, 4);
  auto cfg = small_config();
  std::mt19937_64 rng(5);
  ProviderMap providers{
      {"prefix", std::make_shared<TargetMatchProvider>(testing::random_image(rng, kRes, kRes))},
      {"full", std::make_shared<ZeroProvider>()}};
  const int stride = strokes.mask().params_per_stroke();
  const Eigen::Index split = 3 * stride;

  const auto full = evaluate_objective(strokes, plan, providers, cfg, 0).grad;
  const auto overlay_only = evaluate_objective(strokes, plan, zero_providers(plan), cfg, 0).grad;
  CHECK_FALSE(full.tail(split).isZero(0.0));
  CHECK((full.tail(split) - overlay_only.tail(split)).cwiseAbs().maxCoeff() <= 1e-12);

  const auto prefix_branch = evaluate_objective(strokes, plan, providers, cfg, 0, {{1}, false, {}}).grad;
  CHECK_FALSE(prefix_branch.head(split).isZero(0.0));

  cfg.overlay.lambda_overlay = {0.0};
  const auto no_overlay = evaluate_objective(strokes, plan, providers, cfg, 0).grad;
  CHECK(no_overlay.tail(split).isZero(0.0));
}

TEST_CASE("gradient is the sum of independent branch and overlay contributions") {
  const auto plan = plan3();
  auto cfg = small_config();
  cfg.overlay.lambda_overlay = {0.3, 0.7};
  const auto providers = random_targets(plan, 6);
  for (std::uint64_t seed = 10; seed < 14; ++seed) {
    const auto strokes = spread_strokes(6, seed);
    const auto full = evaluate_objective(strokes, plan, providers, cfg, 0);
    Theta sum = Theta::Zero(strokes.param_count());
    double loss_sum = 0.0;
    for (std::size_t i = 1; i <= 3; ++i) {
      const auto e = evaluate_objective(strokes, plan, providers, cfg, 0, {{i}, false, {}});
      sum += e.grad;
      loss_sum += e.total_loss;
    }
    const auto zeros = zero_providers(plan);
    for (std::size_t b = 0; b < 2; ++b) {
      const auto e = evaluate_objective(strokes, plan, zeros, cfg, 0, {{}, true, b});
      sum += e.grad;
      loss_sum += cfg.overlay.lambda_at(b) * e.overlay[b];
    }
    CHECK((full.grad - sum).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(full.total_loss == doctest::Approx(loss_sum).epsilon(1e-12));
  }
}

TEST_CASE("objective gradient matches finite differences of the total loss") {
  const PhasePlan plan{{2, 4}, {"a", "b"}};
  auto cfg = small_config();
  cfg.overlay.lambda_overlay = {2.0};
  const auto providers = random_targets(plan, 8);
  auto strokes = spread_strokes(4, 9);
  const auto analytic = evaluate_objective(strokes, plan, providers, cfg, 0).grad;
  auto f = [&](const Theta& t) {
    Strokes s = strokes;
    s.unflatten(t);
    return evaluate_objective(s, plan, providers, cfg, 0).total_loss;
  };
  const Theta theta = strokes.flatten();
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const double fd = testing::central_difference(f, theta, k, 1e-6);
    INFO("param " << k << " analytic " << analytic[k] << " fd " << fd);
    CHECK(testing::close_rel(analytic[k], fd, 1e-3, 1e-7));
  }
}

TEST_CASE("optimize is bitwise deterministic with local providers") {
  const PhasePlan plan{{3, 6}, {"a", "b"}};
  auto cfg = small_config();
  cfg.seed = 42;
  const auto providers = random_targets(plan, 11);
  const auto a = optimize(plan, providers, cfg);
  const auto b = optimize(plan, providers, cfg);
  CHECK(a.final_theta == b.final_theta);
  REQUIRE(a.snapshots.size() == b.snapshots.size());
  for (std::size_t s = 0; s < a.snapshots.size(); ++s) {
    CHECK(a.snapshots[s].total_loss == b.snapshots[s].total_loss);
    CHECK(a.snapshots[s].branch_diag == b.snapshots[s].branch_diag);
    CHECK(a.snapshots[s].overlay == b.snapshots[s].overlay);
    CHECK(a.snapshots[s].theta == b.snapshots[s].theta);
  }
}

TEST_CASE("snapshots are increasing and end at the last iteration") {
  const PhasePlan plan{{2, 4}, {"a", "b"}};
  auto cfg = small_config();
  cfg.iterations = 12;
  int calls = 0;
  const auto trace = optimize(plan, random_targets(plan, 1), cfg, [&](int it, const Strokes&) {
    CHECK(it == ++calls);
  });
  CHECK(calls == 12);
  std::vector<int> its;
  for (const auto& s : trace.snapshots) its.push_back(s.iteration);
  CHECK(its == std::vector<int>{5, 10, 12});
  CHECK(trace.snapshots.back().theta == trace.final_theta);
}

TEST_CASE("both branches pulled to a blank target erase the sketch") {
  const PhasePlan plan{{4, 8}, {"a", "b"}};
  auto cfg = small_config();
  cfg.overlay.lambda_overlay = {0.0};
  // With a fixed opacity a stroke can only shrink to a dot; fading lets it vanish.
  cfg.learnable = {false, true};
  cfg.iterations = 600;
  cfg.snapshot_every = 100;
  const auto blank = std::make_shared<TargetMatchProvider>(Image::Zero(kRes, kRes));
  const ProviderMap providers{{"a", blank}, {"b", blank}};
  const auto start = init_strokes(8, plan, cfg);
  const double ink_before = render(start.view(), cfg.render).sum();
  const auto trace = optimize(plan, providers, cfg);
  for (std::size_t s = 1; s < trace.snapshots.size(); ++s) {
    for (std::size_t b = 0; b < 2; ++b) {
      CHECK(trace.snapshots[s].branch_diag[b] <= trace.snapshots[s - 1].branch_diag[b]);
    }
  }
  const double ink_after = render(trace.final_theta.view(), cfg.render).sum();
  CHECK(ink_after < 0.1 * ink_before);
}

TEST_CASE("learnable width and opacity stay valid") {
  const PhasePlan plan{{2, 4}, {"a", "b"}};
  auto cfg = small_config();
  cfg.learnable = {true, true};
  cfg.width_learning_rate = 0.05;
  cfg.opacity_learning_rate = 0.5;
  cfg.iterations = 30;
  const auto blank = std::make_shared<TargetMatchProvider>(Image::Zero(kRes, kRes));
  const auto trace = optimize(plan, {{"a", blank}, {"b", blank}}, cfg);
  bool moved = false;
  for (const auto& c : trace.final_theta.strokes()) {
    CHECK(c.width >= 1e-4);
    CHECK(c.opacity >= 0.0);
    CHECK(c.opacity <= 1.0);
    moved = moved || c.width != cfg.stroke_width || c.opacity != cfg.stroke_opacity;
  }
  CHECK(moved);
}

TEST_CASE("a non-finite guidance gradient aborts naming the branch") {
  const PhasePlan plan{{2, 4}, {"duck", "rabbit"}};
  const auto cfg = small_config();
  ProviderMap providers{{"duck", std::make_shared<ZeroProvider>()},
                        {"rabbit", std::make_shared<NanProvider>()}};
  try {
    optimize(plan, providers, cfg);
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("branch 2") != std::string::npos);
    CHECK(msg.find("rabbit") != std::string::npos);
  }
}

TEST_CASE("missing providers are rejected before any work") {
  const PhasePlan plan{{2, 4}, {"duck", "rabbit"}};
  ProviderMap providers{{"duck", std::make_shared<ZeroProvider>()}};
  CHECK_THROWS_AS(optimize(plan, providers, small_config()), ContractViolation);
}
