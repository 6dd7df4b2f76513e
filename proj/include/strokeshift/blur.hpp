#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "strokeshift/errors.hpp"
#include "strokeshift/raster.hpp"

namespace strokeshift {

/// Normalized 1D Gaussian taps for offsets -radius..radius, radius = ceil(3 sigma).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gaussian_kernel(double sigma) {
  if (!(sigma >= 0.0)) throw ContractViolation("gaussian_kernel: sigma must be >= 0");
  if (sigma == 0.0) return Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Ones(1);
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> taps(2 * radius + 1);
  const Scalar inv = Scalar(1) / (Scalar(2) * Scalar(sigma) * Scalar(sigma));
  for (int k = -radius; k <= radius; ++k) taps[k + radius] = std::exp(-Scalar(k * k) * inv);
  return taps / taps.sum();
}

namespace detail {

// Borders replicate the edge pixel, so constants are preserved.
template <typename Scalar>
InkImage<Scalar> convolve_rows(const InkImage<Scalar>& img,
                               const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& taps) {
  const Eigen::Index radius = taps.size() / 2;
  const Eigen::Index cols = img.cols();
  InkImage<Scalar> out = InkImage<Scalar>::Zero(img.rows(), cols);
  for (Eigen::Index r = 0; r < img.rows(); ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      Scalar acc = Scalar(0);
      for (Eigen::Index k = -radius; k <= radius; ++k) {
        acc += taps[k + radius] * img(r, std::clamp<Eigen::Index>(c + k, 0, cols - 1));
      }
      out(r, c) = acc;
    }
  }
  return out;
}

// Transpose of convolve_rows: scatter each output back onto the clamped taps.
template <typename Scalar>
InkImage<Scalar> convolve_rows_adjoint(const InkImage<Scalar>& grad,
                                       const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& taps) {
  const Eigen::Index radius = taps.size() / 2;
  const Eigen::Index cols = grad.cols();
  InkImage<Scalar> out = InkImage<Scalar>::Zero(grad.rows(), cols);
  for (Eigen::Index r = 0; r < grad.rows(); ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Scalar g = grad(r, c);
      for (Eigen::Index k = -radius; k <= radius; ++k) {
        out(r, std::clamp<Eigen::Index>(c + k, 0, cols - 1)) += taps[k + radius] * g;
      }
    }
  }
  return out;
}

}  // namespace detail

/// Separable Gaussian blur, sigma in pixels. sigma == 0 returns the input.
template <typename Scalar>
InkImage<Scalar> gaussian_blur(const InkImage<Scalar>& img, double sigma) {
  if (!(sigma >= 0.0)) throw ContractViolation("gaussian_blur: sigma must be >= 0");
  if (sigma == 0.0) return img;
  const auto taps = gaussian_kernel<Scalar>(sigma);
  const InkImage<Scalar> horizontal = detail::convolve_rows<Scalar>(img, taps);
  const InkImage<Scalar> transposed = horizontal.transpose();
  return detail::convolve_rows<Scalar>(transposed, taps).transpose();
}

/// Exact adjoint of gaussian_blur.
template <typename Scalar>
InkImage<Scalar> blur_vjp(const InkImage<Scalar>& grad_out, double sigma) {
  if (!(sigma >= 0.0)) throw ContractViolation("blur_vjp: sigma must be >= 0");
  if (sigma == 0.0) return grad_out;
  const auto taps = gaussian_kernel<Scalar>(sigma);
  const InkImage<Scalar> transposed = grad_out.transpose();
  const InkImage<Scalar> vertical =
      detail::convolve_rows_adjoint<Scalar>(transposed, taps).transpose();
  return detail::convolve_rows_adjoint<Scalar>(vertical, taps);
}

}  // namespace strokeshift
