#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <type_traits>
#include <vector>

#include "strokeshift/errors.hpp"
#include "strokeshift/geometry.hpp"

namespace strokeshift {

/// Single-channel ink coverage, row-major, row = y. 0 is blank paper, 1 is full ink.
/// Also used for image-space gradients of the same shape.
template <typename Scalar>
using InkImage = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct RenderConfig {
  int resolution = 224;
  /// Width of the Gaussian distance falloff, canvas units.
  double softness_sigma = 1.5 / 224.0;
  int samples_per_curve = 32;

  /// Config at `resolution` with the falloff set to 1.5 pixel pitches.
  static RenderConfig at_resolution(int resolution) {
    RenderConfig cfg;
    cfg.resolution = resolution;
    cfg.softness_sigma = 1.5 / resolution;
    return cfg;
  }

  void validate() const {
    if (resolution < 8) throw ContractViolation("render.resolution must be >= 8");
    if (!(softness_sigma > 0.0)) throw ContractViolation("render.softness_sigma must be > 0");
    if (samples_per_curve < 2) throw ContractViolation("render.samples_per_curve must be >= 2");
  }
};

/// Coverage further than width + kCoverageCutoffSigmas * sigma from the polyline is
/// below exp(-32) and treated as exactly zero.
inline constexpr double kCoverageCutoffSigmas = 8.0;

/// One stroke's coverage on the axis-aligned pixel window it can touch.
template <typename Scalar>
struct CoveragePatch {
  Eigen::Index row0 = 0;
  Eigen::Index col0 = 0;
  InkImage<Scalar> values;
};

namespace detail {

template <typename Scalar>
using Polyline = Eigen::Matrix<Scalar, 2, Eigen::Dynamic>;

/// M x 4 Bernstein weights at t_j = j / (M - 1).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 4> bernstein_table(int samples) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 4> table(samples, 4);
  for (int j = 0; j < samples; ++j) {
    const auto b = bernstein3(Scalar(j) / Scalar(samples - 1));
    for (int i = 0; i < 4; ++i) table(j, i) = b[i];
  }
  return table;
}

template <typename Scalar>
Polyline<Scalar> sample_polyline(const CubicBezier<Scalar>& curve,
                                 const Eigen::Matrix<Scalar, Eigen::Dynamic, 4>& basis) {
  Eigen::Matrix<Scalar, 2, 4> control;
  for (int i = 0; i < 4; ++i) control.col(i) = curve.points[i];
  return control * basis.transpose();
}

template <typename Scalar>
struct ClosestPoint {
  Scalar dist2;
  Eigen::Index segment;
  Scalar u;  // position along the segment, [0, 1]
};

template <typename Scalar>
ClosestPoint<Scalar> closest_on_polyline(const Polyline<Scalar>& line, const Point2<Scalar>& x) {
  ClosestPoint<Scalar> best{std::numeric_limits<Scalar>::infinity(), 0, Scalar(0)};
  for (Eigen::Index j = 0; j + 1 < line.cols(); ++j) {
    const Point2<Scalar> a = line.col(j);
    const Point2<Scalar> ab = line.col(j + 1) - a;
    const Scalar len2 = ab.squaredNorm();
    Scalar u = Scalar(0);
    if (len2 > Scalar(0)) u = std::clamp((x - a).dot(ab) / len2, Scalar(0), Scalar(1));
    const Scalar d2 = (x - a - u * ab).squaredNorm();
    if (d2 < best.dist2) best = {d2, j, u};
  }
  return best;
}

inline Eigen::Index first_pixel_at_or_after(double coord, int resolution) {
  return static_cast<Eigen::Index>(std::ceil(coord * resolution - 0.5));
}

inline Eigen::Index last_pixel_at_or_before(double coord, int resolution) {
  return static_cast<Eigen::Index>(std::floor(coord * resolution - 0.5));
}

template <typename Scalar>
Point2<Scalar> pixel_center(Eigen::Index row, Eigen::Index col, int resolution) {
  return {(Scalar(col) + Scalar(0.5)) / Scalar(resolution),
          (Scalar(row) + Scalar(0.5)) / Scalar(resolution)};
}

template <typename Scalar>
CoveragePatch<Scalar> stroke_patch(const CubicBezier<Scalar>& curve, const Polyline<Scalar>& line,
                                   const RenderConfig& cfg) {
  const double reach =
      static_cast<double>(curve.width) + kCoverageCutoffSigmas * cfg.softness_sigma;
  const Point2<Scalar> lo = line.rowwise().minCoeff();
  const Point2<Scalar> hi = line.rowwise().maxCoeff();
  const int res = cfg.resolution;
  const Eigen::Index c0 =
      std::max<Eigen::Index>(0, first_pixel_at_or_after(double(lo.x()) - reach, res));
  const Eigen::Index c1 =
      std::min<Eigen::Index>(res - 1, last_pixel_at_or_before(double(hi.x()) + reach, res));
  const Eigen::Index r0 =
      std::max<Eigen::Index>(0, first_pixel_at_or_after(double(lo.y()) - reach, res));
  const Eigen::Index r1 =
      std::min<Eigen::Index>(res - 1, last_pixel_at_or_before(double(hi.y()) + reach, res));

  CoveragePatch<Scalar> patch;
  patch.row0 = r0;
  patch.col0 = c0;
  if (c1 < c0 || r1 < r0) return patch;

  const Scalar inv_two_sigma2 = Scalar(1) / (Scalar(2) * Scalar(cfg.softness_sigma) *
                                             Scalar(cfg.softness_sigma));
  patch.values.resize(r1 - r0 + 1, c1 - c0 + 1);
  for (Eigen::Index r = r0; r <= r1; ++r) {
    for (Eigen::Index c = c0; c <= c1; ++c) {
      const auto closest = closest_on_polyline(line, pixel_center<Scalar>(r, c, res));
      const Scalar excess = std::sqrt(closest.dist2) - curve.width;
      patch.values(r - r0, c - c0) =
          excess <= Scalar(0) ? curve.opacity
                              : curve.opacity * std::exp(-excess * excess * inv_two_sigma2);
    }
  }
  return patch;
}

}  // namespace detail

/// Per-stroke coverage patches for every stroke of `view`, in stroke order.
template <typename Scalar>
std::vector<CoveragePatch<Scalar>> coverage_patches(const StrokeView<Scalar>& view,
                                                    const RenderConfig& cfg) {
  cfg.validate();
  const auto basis = detail::bernstein_table<Scalar>(cfg.samples_per_curve);
  std::vector<CoveragePatch<Scalar>> patches;
  patches.reserve(view.size());
  for (const auto& curve : view) {
    patches.push_back(detail::stroke_patch(curve, detail::sample_polyline(curve, basis), cfg));
  }
  return patches;
}

/// ink = 1 - prod_s (1 - c_s), order independent.
template <typename Scalar>
InkImage<Scalar> composite(std::span<const CoveragePatch<Scalar>> patches, int resolution) {
  InkImage<Scalar> transmittance = InkImage<Scalar>::Ones(resolution, resolution);
  for (const auto& p : patches) {
    if (p.values.size() == 0) continue;
    transmittance.block(p.row0, p.col0, p.values.rows(), p.values.cols()).array() *=
        (Scalar(1) - p.values.array());
  }
  return (Scalar(1) - transmittance.array()).matrix();
}

template <typename Scalar>
InkImage<Scalar> render(const StrokeView<Scalar>& view, const RenderConfig& cfg) {
  const auto patches = coverage_patches(view, cfg);
  return composite<Scalar>(patches, cfg.resolution);
}

/// Adds sum_x grad(x) * d ink(x) / d theta into `out` (parent theta layout).
/// `patches` must be coverage_patches(view, cfg).
template <typename Scalar>
void accumulate_render_vjp(const StrokeView<Scalar>& view, const RenderConfig& cfg,
                           const std::type_identity_t<InkImage<Scalar>>& grad,
                           std::span<const CoveragePatch<Scalar>> patches,
                           ParamVector<Scalar>& out) {
  cfg.validate();
  const int res = cfg.resolution;
  if (grad.rows() != res || grad.cols() != res) {
    throw ContractViolation("render_vjp: gradient image does not match render resolution");
  }
  const int stride = view.mask.params_per_stroke();
  if (out.size() != static_cast<Eigen::Index>(view.parent_size) * stride) {
    throw ContractViolation("render_vjp: output does not match parent parameter count");
  }
  if (patches.size() != view.size()) {
    throw ContractViolation("render_vjp: patch count does not match view");
  }

  // Transmittance of the non-saturated strokes plus a count of fully opaque hits,
  // so prod_{r != s} (1 - c_r) stays exact when some c_r == 1.
  InkImage<Scalar> open = InkImage<Scalar>::Ones(res, res);
  Eigen::MatrixXi saturated = Eigen::MatrixXi::Zero(res, res);
  for (const auto& p : patches) {
    for (Eigen::Index r = 0; r < p.values.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.values.cols(); ++c) {
        const Scalar t = Scalar(1) - p.values(r, c);
        if (t == Scalar(0)) {
          ++saturated(p.row0 + r, p.col0 + c);
        } else {
          open(p.row0 + r, p.col0 + c) *= t;
        }
      }
    }
  }

  const auto basis = detail::bernstein_table<Scalar>(cfg.samples_per_curve);
  const Scalar sigma = Scalar(cfg.softness_sigma);
  const Scalar inv_two_sigma2 = Scalar(1) / (Scalar(2) * sigma * sigma);
  const Scalar inv_sigma2 = Scalar(1) / (sigma * sigma);

  for (std::size_t s = 0; s < view.size(); ++s) {
    const auto& curve = view[s];
    const auto& patch = patches[s];
    const auto line = detail::sample_polyline(curve, basis);
    detail::Polyline<Scalar> d_line = detail::Polyline<Scalar>::Zero(2, line.cols());
    Scalar d_width = Scalar(0);
    Scalar d_opacity = Scalar(0);

    for (Eigen::Index r = 0; r < patch.values.rows(); ++r) {
      for (Eigen::Index c = 0; c < patch.values.cols(); ++c) {
        const Eigen::Index row = patch.row0 + r;
        const Eigen::Index col = patch.col0 + c;
        const Scalar g = grad(row, col);
        if (g == Scalar(0)) continue;
        const Scalar t = Scalar(1) - patch.values(r, c);
        Scalar others;
        if (t == Scalar(0)) {
          others = saturated(row, col) == 1 ? open(row, col) : Scalar(0);
        } else {
          others = saturated(row, col) > 0 ? Scalar(0) : open(row, col) / t;
        }
        const Scalar g_cov = g * others;
        if (g_cov == Scalar(0)) continue;

        const Point2<Scalar> x = detail::pixel_center<Scalar>(row, col, res);
        const auto closest = detail::closest_on_polyline(line, x);
        const Scalar dist = std::sqrt(closest.dist2);
        const Scalar excess = dist - curve.width;
        if (excess <= Scalar(0)) {
          d_opacity += g_cov;
          continue;
        }
        const Scalar falloff = std::exp(-excess * excess * inv_two_sigma2);
        d_opacity += g_cov * falloff;
        const Scalar d_excess = -g_cov * curve.opacity * falloff * excess * inv_sigma2;
        d_width -= d_excess;
        const Eigen::Index j = closest.segment;
        const Point2<Scalar> q = line.col(j) + closest.u * (line.col(j + 1) - line.col(j));
        const Point2<Scalar> d_q = -d_excess * (x - q) / dist;
        d_line.col(j) += (Scalar(1) - closest.u) * d_q;
        d_line.col(j + 1) += closest.u * d_q;
      }
    }

    const Eigen::Matrix<Scalar, 2, 4> d_control = d_line * basis;
    const Eigen::Index base = static_cast<Eigen::Index>(view.offset + s) * stride;
    for (int i = 0; i < 4; ++i) out.template segment<2>(base + 2 * i) += d_control.col(i);
    int k = 8;
    if (view.mask.width) out[base + k++] += d_width;
    if (view.mask.opacity) out[base + k++] += d_opacity;
  }
}

/// Vector-Jacobian product of render(): gradient w.r.t. the parent's flattened theta.
/// Strokes outside the view get zero entries.
template <typename Scalar>
ParamVector<Scalar> render_vjp(const StrokeView<Scalar>& view, const RenderConfig& cfg,
                               const std::type_identity_t<InkImage<Scalar>>& grad) {
  ParamVector<Scalar> out =
      ParamVector<Scalar>::Zero(static_cast<Eigen::Index>(view.parent_size) *
                                view.mask.params_per_stroke());
  const auto patches = coverage_patches(view, cfg);
  accumulate_render_vjp<Scalar>(view, cfg, grad, patches, out);
  return out;
}

}  // namespace strokeshift
