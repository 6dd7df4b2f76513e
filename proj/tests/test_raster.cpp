#include <doctest.h>

#include <random>

#include "strokeshift/raster.hpp"
#include "test_support.hpp"

using namespace strokeshift;
using testing::close_rel;

namespace {

constexpr int kRes = 32;

RenderConfig small_config() { return RenderConfig::at_resolution(kRes); }

/// Horizontal straight stroke through the centers of row `row`.
CubicBezier<double> horizontal_line(int row, double opacity) {
  const double y = (row + 0.5) / kRes;
  CubicBezier<double> c;
  c.points = {Point2<double>(0.2, y), Point2<double>(0.4, y), Point2<double>(0.6, y),
              Point2<double>(0.8, y)};
  c.opacity = opacity;
  return c;
}

double weighted_render(const StrokeSet<double>& base, const ParamVector<double>& theta,
                       const InkImage<double>& weights, const RenderConfig& cfg) {
  StrokeSet<double> copy = base;
  copy.unflatten(theta);
  return render(copy.view(), cfg).cwiseProduct(weights).sum();
}

}  // namespace

TEST_CASE("empty set renders blank") {
  StrokeSet<double> empty;
  const auto img = render(empty.view(), small_config());
  CHECK(img.rows() == kRes);
  CHECK(img.cols() == kRes);
  CHECK(img.isZero(0.0));
}

TEST_CASE("zero-distance pixel of an opaque stroke is full ink") {
  StrokeSet<double> set({horizontal_line(10, 1.0)});
  const auto img = render(set.view(), small_config());
  CHECK(img(10, 16) == 1.0);
}

TEST_CASE("two half-opaque strokes composite to 0.75") {
  StrokeSet<double> set({horizontal_line(10, 0.5), horizontal_line(10, 0.5)});
  const auto img = render(set.view(), small_config());
  CHECK(img(10, 16) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("degenerate stroke renders as a soft dot") {
  CubicBezier<double> dot;
  dot.points.fill(Point2<double>((16 + 0.5) / kRes, (16 + 0.5) / kRes));
  StrokeSet<double> set({dot});
  const auto img = render(set.view(), small_config());
  CHECK(img(16, 16) == 1.0);
  CHECK(img(16, 20) > 0.0);
  CHECK(img(16, 20) < img(16, 18));
  CHECK(img.allFinite());
}

TEST_CASE("ink range, monotonicity and prefix consistency on random sets") {
  std::mt19937_64 rng(11);
  const auto cfg = small_config();
  for (int trial = 0; trial < 20; ++trial) {
    auto set = testing::random_strokes(rng, 6);
    // Include off-canvas control points.
    set[0].points[1] = {-0.4, 1.3};
    InkImage<double> previous = InkImage<double>::Zero(kRes, kRes);
    for (std::size_t k = 1; k <= set.size(); ++k) {
      const auto img = render(set.slice(0, k), cfg);
      CHECK(img.minCoeff() >= 0.0);
      CHECK(img.maxCoeff() <= 1.0);
      CHECK((img.array() >= previous.array()).all());
      previous = img;
    }
  }
}

TEST_CASE("render is deterministic") {
  std::mt19937_64 rng(5);
  const auto set = testing::random_strokes(rng, 8);
  const auto a = render(set.view(), small_config());
  const auto b = render(set.view(), small_config());
  CHECK(a == b);
}

TEST_CASE("shifting all control points by one pixel pitch shifts the render by one pixel") {
  std::mt19937_64 rng(21);
  const auto cfg = small_config();
  auto set = testing::random_strokes(rng, 4);
  for (auto& c : set.strokes()) {
    for (auto& p : c.points) p = 0.3 + 0.4 * p.array();  // keep away from the border
  }
  auto shifted = set;
  for (auto& c : shifted.strokes()) {
    for (auto& p : c.points) p.x() += 1.0 / kRes;
  }
  const auto a = render(set.view(), cfg);
  const auto b = render(shifted.view(), cfg);
  const double residual =
      (b.block(2, 3, kRes - 4, kRes - 5) - a.block(2, 2, kRes - 4, kRes - 5)).cwiseAbs().maxCoeff();
  CHECK(residual <= 0.05);
}

TEST_CASE("render_vjp of a zero gradient is zero") {
  std::mt19937_64 rng(3);
  const auto set = testing::random_strokes(rng, 3, {true, true});
  const auto grads = render_vjp(set.view(), small_config(), InkImage<double>::Zero(kRes, kRes));
  CHECK(grads.size() == set.param_count());
  CHECK(grads.isZero(0.0));
}

TEST_CASE("render_vjp ignores pixels far beyond the falloff") {
  CubicBezier<double> c;
  c.points = {Point2<double>(0.1, 0.1), Point2<double>(0.12, 0.1), Point2<double>(0.14, 0.1),
              Point2<double>(0.16, 0.1)};
  StrokeSet<double> set({c}, {true, true});
  InkImage<double> grad = InkImage<double>::Zero(kRes, kRes);
  grad(28, 28) = 1.0;
  const auto g = render_vjp(set.view(), small_config(), grad);
  CHECK(g.cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("render_vjp matches central differences for a random gradient image") {
  std::mt19937_64 rng(42);
  const auto cfg = small_config();
  for (int trial = 0; trial < 5; ++trial) {
    const auto set = testing::random_strokes(rng, 1, {true, true});
    const auto weights = testing::random_image(rng, kRes, kRes, -1.0, 1.0);
    const auto analytic = render_vjp(set.view(), cfg, weights);
    const auto theta = set.flatten();
    auto f = [&](const ParamVector<double>& t) { return weighted_render(set, t, weights, cfg); };
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      const double fd = testing::central_difference(f, theta, k, 1e-5);
      INFO("trial " << trial << " param " << k << " analytic " << analytic[k] << " fd " << fd);
      CHECK(close_rel(analytic[k], fd, 1e-3, 1e-6));
    }
  }
}

TEST_CASE("render_vjp handles saturated (opacity 1) overlaps") {
  const auto cfg = small_config();
  auto a = horizontal_line(12, 1.0);
  auto b = horizontal_line(12, 1.0);
  b.points[0].y() += 0.3 / kRes;
  b.points[3].y() -= 0.2 / kRes;
  StrokeSet<double> set({a, b}, {true, false});
  std::mt19937_64 rng(8);
  const auto weights = testing::random_image(rng, kRes, kRes, -1.0, 1.0);
  const auto analytic = render_vjp(set.view(), cfg, weights);
  const auto theta = set.flatten();
  auto f = [&](const ParamVector<double>& t) { return weighted_render(set, t, weights, cfg); };
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const double fd = testing::central_difference(f, theta, k, 1e-6);
    INFO("param " << k << " analytic " << analytic[k] << " fd " << fd);
    CHECK(close_rel(analytic[k], fd, 1e-3, 1e-6));
  }
}

TEST_CASE("render_vjp on a view leaves other strokes' gradients at zero") {
  std::mt19937_64 rng(9);
  const auto set = testing::random_strokes(rng, 5);
  const auto weights = testing::random_image(rng, kRes, kRes);
  const auto g = render_vjp(set.slice(1, 3), small_config(), weights);
  REQUIRE(g.size() == set.param_count());
  CHECK(g.segment(0, 8).isZero(0.0));
  CHECK(g.segment(24, 16).isZero(0.0));
  CHECK_FALSE(g.segment(8, 16).isZero(0.0));
}

TEST_CASE("render_vjp rejects a mismatched gradient image") {
  std::mt19937_64 rng(1);
  const auto set = testing::random_strokes(rng, 1);
  CHECK_THROWS_AS(render_vjp(set.view(), small_config(), InkImage<double>::Zero(16, 16)),
                  ContractViolation);
}

TEST_CASE("RenderConfig validation") {
  RenderConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.resolution = 4;
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
  cfg = RenderConfig{};
  cfg.softness_sigma = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
  cfg = RenderConfig{};
  cfg.samples_per_curve = 1;
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
}

TEST_CASE("render works in single precision") {
  StrokeSet<float> set({CubicBezier<float>{{Point2<float>(0.2f, 16.5f / kRes), Point2<float>(0.4f, 16.5f / kRes),
                                            Point2<float>(0.6f, 16.5f / kRes), Point2<float>(0.8f, 16.5f / kRes)},
                                           0.01f,
                                           1.0f}});
  const auto img = render(set.view(), small_config());
  CHECK(img.maxCoeff() == 1.0f);
  CHECK(img.minCoeff() >= 0.0f);
}
