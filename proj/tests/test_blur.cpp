#include <doctest.h>

#include <random>

#include "strokeshift/blur.hpp"
#include "test_support.hpp"

using namespace strokeshift;

TEST_CASE("sigma 0 is the identity") {
  std::mt19937_64 rng(1);
  const auto img = testing::random_image(rng, 9, 7);
  CHECK(gaussian_blur(img, 0.0) == img);
  CHECK(blur_vjp(img, 0.0) == img);
}

TEST_CASE("constant images stay constant") {
  for (double sigma : {0.5, 1.0, 2.5, 6.0}) {
    const InkImage<double> img = InkImage<double>::Constant(12, 10, 0.37);
    const auto out = gaussian_blur(img, sigma);
    CHECK((out.array() - 0.37).abs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("one-hot center of a 5x5 image keeps the 2D kernel's center weight") {
  InkImage<double> img = InkImage<double>::Zero(5, 5);
  img(2, 2) = 1.0;
  // (1 / (1 + 2 (e^-1/2 + e^-2 + e^-9/2)))^2, evaluated independently.
  constexpr double kCenterWeight = 0.15924112569070248;
  CHECK(gaussian_blur(img, 1.0)(2, 2) == doctest::Approx(kCenterWeight).epsilon(1e-14));
}

TEST_CASE("kernel is normalized and truncated at ceil(3 sigma)") {
  const auto k = gaussian_kernel<double>(1.2);
  CHECK(k.size() == 2 * 4 + 1);
  CHECK(k.sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(k[4] == k.maxCoeff());
}

TEST_CASE("negative sigma is rejected") {
  const InkImage<double> img = InkImage<double>::Zero(4, 4);
  CHECK_THROWS_AS(gaussian_blur(img, -1.0), ContractViolation);
  CHECK_THROWS_AS(blur_vjp(img, -0.1), ContractViolation);
}

TEST_CASE("blur keeps ink in [0, 1]") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 10; ++i) {
    const auto out = gaussian_blur(testing::random_image(rng, 16, 16), 2.0);
    CHECK(out.minCoeff() >= 0.0);
    CHECK(out.maxCoeff() <= 1.0 + 1e-15);
  }
}

TEST_CASE("blur_vjp of zeros is zero") {
  CHECK(blur_vjp(InkImage<double>(InkImage<double>::Zero(6, 6)), 1.5).isZero(0.0));
}

TEST_CASE("blur_vjp is the adjoint: <blur x, y> == <x, blur_vjp y>") {
  std::mt19937_64 rng(5);
  for (double sigma : {0.7, 1.0, 3.0}) {
    const auto x = testing::random_image(rng, 11, 13, -1, 1);
    const auto y = testing::random_image(rng, 11, 13, -1, 1);
    const double lhs = gaussian_blur(x, sigma).cwiseProduct(y).sum();
    const double rhs = x.cwiseProduct(blur_vjp(y, sigma)).sum();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
  }
}

TEST_CASE("blur_vjp matches finite differences") {
  std::mt19937_64 rng(6);
  const auto x = testing::random_image(rng, 10, 10);
  const auto g = testing::random_image(rng, 10, 10, -1, 1);
  const auto analytic = blur_vjp(g, 1.0);
  const double h = 1e-5;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    InkImage<double> plus = x, minus = x;
    plus.data()[k] += h;
    minus.data()[k] -= h;
    const double fd = (gaussian_blur(plus, 1.0).cwiseProduct(g).sum() -
                       gaussian_blur(minus, 1.0).cwiseProduct(g).sum()) /
                      (2 * h);
    CHECK(testing::close_rel(analytic.data()[k], fd, 1e-5, 1e-9));
  }
}
