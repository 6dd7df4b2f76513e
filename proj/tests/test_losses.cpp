#include <doctest.h>

#include <random>
#include <vector>

#include "strokeshift/losses.hpp"
#include "test_support.hpp"

using namespace strokeshift;

namespace {

InkImage<double> square_blob(int res, int row, int col, int size) {
  InkImage<double> img = InkImage<double>::Zero(res, res);
  img.block(row, col, size, size).setOnes();
  return img;
}

OverlayResult<double> value_only(double v) {
  OverlayResult<double> r;
  r.value = v;
  return r;
}

}  // namespace

TEST_CASE("disjoint supports after blur give zero overlap") {
  const auto a = square_blob(32, 2, 2, 4);
  const auto b = square_blob(32, 24, 24, 4);
  CHECK(overlay_loss(a, b, 1.0, 1e-8).value == 0.0);
}

TEST_CASE("identical binary maps give overlap 1") {
  const auto a = square_blob(16, 3, 5, 6);
  CHECK(overlay_loss(a, a, 0.0, 1e-12).value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(overlay_loss(a, a, 0.0, 0.0).value == 1.0);
}

TEST_CASE("2x2 hand case is 2/3") {
  InkImage<double> p(2, 2), d(2, 2);
  p << 1, 0, 0, 0;
  d << 1, 1, 0, 0;
  CHECK(overlay_loss(p, d, 0.0, 0.0).value == 2.0 / 3.0);
}

TEST_CASE("blank canvases give zero loss and zero gradients") {
  const InkImage<double> blank = InkImage<double>::Zero(8, 8);
  const auto r = overlay_loss(blank, blank, 2.0, 1e-8);
  CHECK(r.value == 0.0);
  CHECK(r.grad_prefix.isZero(0.0));
  CHECK(r.grad_delta.isZero(0.0));
}

TEST_CASE("overlay loss is exactly symmetric and bounded") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 50; ++i) {
    const auto a = testing::random_image(rng, 12, 12);
    const auto b = testing::random_image(rng, 12, 12);
    const double sigma = testing::uniform(rng, 0.0, 3.0);
    const double ab = overlay_loss(a, b, sigma, 1e-8).value;
    CHECK(ab == overlay_loss(b, a, sigma, 1e-8).value);
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
  }
}

TEST_CASE("overlay gradients match finite differences on random 8x8 images") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 3; ++trial) {
    const auto p = testing::random_image(rng, 8, 8);
    const auto d = testing::random_image(rng, 8, 8);
    const double sigma = 1.0;
    const auto r = overlay_loss(p, d, sigma, 1e-8);
    const double h = 1e-6;
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      InkImage<double> pp = p, pm = p, dp = d, dm = d;
      pp.data()[k] += h;
      pm.data()[k] -= h;
      dp.data()[k] += h;
      dm.data()[k] -= h;
      const double fd_p =
          (overlay_loss(pp, d, sigma, 1e-8).value - overlay_loss(pm, d, sigma, 1e-8).value) /
          (2 * h);
      const double fd_d =
          (overlay_loss(p, dp, sigma, 1e-8).value - overlay_loss(p, dm, sigma, 1e-8).value) /
          (2 * h);
      CHECK(testing::close_rel(r.grad_prefix.data()[k], fd_p, 1e-4, 1e-9));
      CHECK(testing::close_rel(r.grad_delta.data()[k], fd_d, 1e-4, 1e-9));
    }
  }
}

TEST_CASE("moving the delta blob away from the prefix never increases overlap") {
  const auto prefix = square_blob(48, 20, 8, 8);
  double previous = std::numeric_limits<double>::infinity();
  for (int col = 8; col <= 38; ++col) {
    const double l = overlay_loss(prefix, square_blob(48, 20, col, 8), 3.0, 1e-8).value;
    CHECK(l <= previous);
    previous = l;
  }
  CHECK(previous < 1e-6);
}

TEST_CASE("overlay_loss rejects mismatched images") {
  CHECK_THROWS_AS(overlay_loss(square_blob(8, 0, 0, 2), square_blob(9, 0, 0, 2), 1.0, 1e-8),
                  ContractViolation);
}

TEST_CASE("total_loss sums branches and weighted overlays") {
  OverlayConfig cfg;
  const std::vector<InkImage<double>> grads2(2);
  const std::vector<InkImage<double>> grads3(3);

  cfg.lambda_overlay = {0.0};
  const std::vector<double> ab{1.25, 4.5};
  const std::vector<OverlayResult<double>> any{value_only(0.9)};
  CHECK(total_loss<double>(ab, grads2, any, cfg).value == 1.25 + 4.5);

  cfg.lambda_overlay = {0.1};
  const std::vector<double> sds2{1.0, 2.0};
  const std::vector<OverlayResult<double>> ov2{value_only(0.5)};
  CHECK(total_loss<double>(sds2, grads2, ov2, cfg).value == doctest::Approx(3.05).epsilon(1e-15));

  cfg.lambda_overlay = {0.1, 0.1};
  const std::vector<double> sds3{1.0, 1.0, 1.0};
  const std::vector<OverlayResult<double>> ov3{value_only(0.2), value_only(0.4)};
  CHECK(total_loss<double>(sds3, grads3, ov3, cfg).value == doctest::Approx(3.06).epsilon(1e-15));

  CHECK_THROWS_AS(total_loss<double>(sds3, grads3, ov2, cfg), ContractViolation);
  CHECK_THROWS_AS(total_loss<double>(sds2, grads3, ov2, cfg), ContractViolation);
}

TEST_CASE("total_loss routes weighted overlay gradients to the right renders") {
  std::mt19937_64 rng(12);
  OverlayConfig cfg;
  cfg.lambda_overlay = {0.5};
  const auto p = testing::random_image(rng, 6, 6);
  const auto d = testing::random_image(rng, 6, 6);
  const std::vector<OverlayResult<double>> ov{overlay_loss(p, d, 1.0, 1e-8)};
  const std::vector<InkImage<double>> branch{testing::random_image(rng, 6, 6),
                                             testing::random_image(rng, 6, 6)};
  const std::vector<double> losses{0.0, 0.0};
  const auto total = total_loss<double>(losses, branch, ov, cfg);
  CHECK(total.cumulative_grads[0].isApprox(branch[0] + 0.5 * ov[0].grad_prefix));
  CHECK(total.cumulative_grads[1] == branch[1]);
  CHECK(total.subset_grads[0].isApprox(0.5 * ov[0].grad_delta));
}

TEST_CASE("OverlayConfig validation") {
  OverlayConfig cfg;
  CHECK_NOTHROW(cfg.validate(2));
  CHECK_NOTHROW(cfg.validate(5));
  cfg.lambda_overlay = {0.1, 0.2};
  CHECK_NOTHROW(cfg.validate(3));
  CHECK_THROWS_AS(cfg.validate(2), ContractViolation);
  cfg.lambda_overlay = {-0.1};
  CHECK_THROWS_AS(cfg.validate(2), ContractViolation);
  cfg = OverlayConfig{};
  cfg.epsilon = 0.0;
  CHECK_THROWS_AS(cfg.validate(2), ContractViolation);
  cfg = OverlayConfig{};
  cfg.blur_sigma = -1.0;
  CHECK_THROWS_AS(cfg.validate(2), ContractViolation);
}
