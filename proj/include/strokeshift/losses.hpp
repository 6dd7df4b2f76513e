#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <vector>

#include "strokeshift/blur.hpp"
#include "strokeshift/errors.hpp"
#include "strokeshift/raster.hpp"

namespace strokeshift {

struct OverlayConfig {
  /// Blur width in pixels at the render resolution.
  double blur_sigma = 4.0;
  /// One weight per phase boundary (K - 1 entries), or a single entry applied to all.
  std::vector<double> lambda_overlay{0.1};
  double epsilon = 1e-8;

  double lambda_at(std::size_t boundary) const {
    if (lambda_overlay.size() == 1) return lambda_overlay.front();
    if (boundary >= lambda_overlay.size()) {
      throw ContractViolation("overlay.lambda_overlay has fewer entries than phase boundaries");
    }
    return lambda_overlay[boundary];
  }

  void validate(std::size_t phase_count) const {
    if (!(blur_sigma >= 0.0)) throw ContractViolation("overlay.blur_sigma must be >= 0");
    if (!(epsilon > 0.0)) throw ContractViolation("overlay.epsilon must be > 0");
    if (lambda_overlay.empty()) throw ContractViolation("overlay.lambda_overlay is empty");
    if (lambda_overlay.size() != 1 && lambda_overlay.size() + 1 != phase_count) {
      throw ContractViolation("overlay.lambda_overlay needs 1 or K-1 entries");
    }
    for (double l : lambda_overlay) {
      if (!(l >= 0.0)) throw ContractViolation("overlay.lambda_overlay must be >= 0");
    }
  }
};

template <typename Scalar>
struct OverlayResult {
  Scalar value = Scalar(0);
  InkImage<Scalar> grad_prefix;
  InkImage<Scalar> grad_delta;
};

/// L = 2 <P~, D~> / (|P~|_1 + |D~|_1 + eps), with X~ the blurred image.
/// Gradients are w.r.t. the unblurred inputs. `epsilon` may be 0 when at least
/// one image has ink.
template <typename Scalar>
OverlayResult<Scalar> overlay_loss(const InkImage<Scalar>& prefix, const InkImage<Scalar>& delta,
                                   double blur_sigma, double epsilon) {
  if (prefix.rows() != delta.rows() || prefix.cols() != delta.cols()) {
    throw ContractViolation("overlay_loss: image dimensions differ");
  }
  const InkImage<Scalar> p = gaussian_blur(prefix, blur_sigma);
  const InkImage<Scalar> d = gaussian_blur(delta, blur_sigma);
  const Scalar inner = p.cwiseProduct(d).sum();
  const Scalar denom = p.sum() + d.sum() + Scalar(epsilon);

  OverlayResult<Scalar> result;
  if (denom == Scalar(0)) {
    result.grad_prefix = InkImage<Scalar>::Zero(prefix.rows(), prefix.cols());
    result.grad_delta = InkImage<Scalar>::Zero(prefix.rows(), prefix.cols());
    return result;
  }
  result.value = Scalar(2) * inner / denom;
  // dL/dP~ = 2 D~ / denom - L / denom (the norm is a plain sum of nonnegative pixels)
  const Scalar shift = result.value / denom;
  const InkImage<Scalar> g_p = ((Scalar(2) / denom) * d.array() - shift).matrix();
  const InkImage<Scalar> g_d = ((Scalar(2) / denom) * p.array() - shift).matrix();
  result.grad_prefix = blur_vjp(g_p, blur_sigma);
  result.grad_delta = blur_vjp(g_d, blur_sigma);
  return result;
}

template <typename Scalar>
OverlayResult<Scalar> overlay_loss(const InkImage<Scalar>& prefix, const InkImage<Scalar>& delta,
                                   const OverlayConfig& cfg) {
  return overlay_loss(prefix, delta, cfg.blur_sigma, cfg.epsilon);
}

/// Image-space gradients after weighting, ready for render_vjp.
template <typename Scalar>
struct TotalLoss {
  Scalar value = Scalar(0);
  /// Gradient on the cumulative render I_{1:i}, one per phase.
  std::vector<InkImage<Scalar>> cumulative_grads;
  /// Gradient on the lone render of subset S_{i+1}, one per boundary.
  std::vector<InkImage<Scalar>> subset_grads;
};

/// sum_i L_SDS^i + sum_i lambda_i L_overlay^i. overlay_terms[i] must pair the
/// cumulative render I_{1:i+1} (prefix) with the subset S_{i+2} alone (delta).
template <typename Scalar>
TotalLoss<Scalar> total_loss(std::span<const Scalar> branch_losses,
                             std::span<const InkImage<Scalar>> branch_grads,
                             std::span<const OverlayResult<Scalar>> overlay_terms,
                             const OverlayConfig& cfg) {
  const std::size_t phases = branch_losses.size();
  if (phases < 2) throw ContractViolation("total_loss: need at least two phases");
  if (branch_grads.size() != phases) {
    throw ContractViolation("total_loss: branch gradient count does not match K");
  }
  if (overlay_terms.size() + 1 != phases) {
    throw ContractViolation("total_loss: need exactly K-1 overlay terms");
  }

  TotalLoss<Scalar> total;
  for (std::size_t i = 0; i < phases; ++i) {
    total.value += branch_losses[i];
    total.cumulative_grads.push_back(branch_grads[i]);
  }
  for (std::size_t i = 0; i + 1 < phases; ++i) {
    const Scalar lambda = Scalar(cfg.lambda_at(i));
    const auto& term = overlay_terms[i];
    total.value += lambda * term.value;
    if (term.grad_prefix.size() > 0) {
      if (term.grad_prefix.rows() != total.cumulative_grads[i].rows() ||
          term.grad_prefix.cols() != total.cumulative_grads[i].cols()) {
        throw ContractViolation("total_loss: overlay gradient shape differs from branch");
      }
      total.cumulative_grads[i] += lambda * term.grad_prefix;
      total.subset_grads.push_back(lambda * term.grad_delta);
    } else {
      total.subset_grads.emplace_back();
    }
  }
  return total;
}

}  // namespace strokeshift
