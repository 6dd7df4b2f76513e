#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "strokeshift/errors.hpp"

namespace strokeshift {

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

template <typename Scalar>
using ParamVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Default stroke half-thickness and opacity, in canvas units ([0,1]^2 canvas).
inline constexpr double kDefaultStrokeWidth = 0.006;
inline constexpr double kDefaultStrokeOpacity = 1.0;

/// A cubic Bezier stroke. Control points may leave the canvas while optimizing.
template <typename Scalar>
struct CubicBezier {
  std::array<Point2<Scalar>, 4> points{Point2<Scalar>::Zero(), Point2<Scalar>::Zero(),
                                       Point2<Scalar>::Zero(), Point2<Scalar>::Zero()};
  Scalar width = Scalar(kDefaultStrokeWidth);
  Scalar opacity = Scalar(kDefaultStrokeOpacity);

  bool is_valid() const {
    for (const auto& p : points) {
      if (!p.allFinite()) return false;
    }
    return std::isfinite(static_cast<double>(width)) && width > Scalar(0) &&
           opacity >= Scalar(0) && opacity <= Scalar(1);
  }

  bool operator==(const CubicBezier& o) const {
    for (std::size_t i = 0; i < 4; ++i) {
      if (points[i] != o.points[i]) return false;
    }
    return width == o.width && opacity == o.opacity;
  }
};

/// Which per-stroke scalars besides the 8 control-point coordinates are part of theta.
struct LearnableMask {
  bool width = false;
  bool opacity = false;

  int params_per_stroke() const { return 8 + (width ? 1 : 0) + (opacity ? 1 : 0); }
  bool operator==(const LearnableMask&) const = default;
};

/// Bernstein basis of degree 3 at t.
template <typename Scalar>
std::array<Scalar, 4> bernstein3(Scalar t) {
  const Scalar s = Scalar(1) - t;
  return {s * s * s, Scalar(3) * t * s * s, Scalar(3) * t * t * s, t * t * t};
}

template <typename Scalar>
Point2<Scalar> eval_bezier(const CubicBezier<Scalar>& curve, Scalar t) {
  if (!(t >= Scalar(0) && t <= Scalar(1))) {
    throw ContractViolation("eval_bezier: t must lie in [0, 1]");
  }
  const auto b = bernstein3(t);
  return b[0] * curve.points[0] + b[1] * curve.points[1] + b[2] * curve.points[2] +
         b[3] * curve.points[3];
}

/// Read-only window onto a contiguous run of strokes of a parent StrokeSet.
/// `offset` is the index of the first stroke in the parent, so gradients
/// computed on the view land on the parent's theta layout.
template <typename Scalar>
struct StrokeView {
  std::span<const CubicBezier<Scalar>> strokes;
  std::size_t offset = 0;
  std::size_t parent_size = 0;
  LearnableMask mask;

  std::size_t size() const { return strokes.size(); }
  bool empty() const { return strokes.empty(); }
  const CubicBezier<Scalar>& operator[](std::size_t i) const { return strokes[i]; }
  auto begin() const { return strokes.begin(); }
  auto end() const { return strokes.end(); }
};

template <typename Scalar>
class StrokeSet {
 public:
  StrokeSet() = default;
  explicit StrokeSet(std::vector<CubicBezier<Scalar>> strokes, LearnableMask mask = {})
      : strokes_(std::move(strokes)), mask_(mask) {}

  std::size_t size() const { return strokes_.size(); }
  bool empty() const { return strokes_.empty(); }

  const std::vector<CubicBezier<Scalar>>& strokes() const { return strokes_; }
  std::vector<CubicBezier<Scalar>>& strokes() { return strokes_; }
  const CubicBezier<Scalar>& operator[](std::size_t i) const { return strokes_[i]; }
  CubicBezier<Scalar>& operator[](std::size_t i) { return strokes_[i]; }

  const LearnableMask& mask() const { return mask_; }
  void set_mask(LearnableMask mask) { mask_ = mask; }

  Eigen::Index param_count() const {
    return static_cast<Eigen::Index>(strokes_.size()) * mask_.params_per_stroke();
  }

  StrokeView<Scalar> view() const { return slice(0, strokes_.size()); }

  /// Strokes [first, last).
  StrokeView<Scalar> slice(std::size_t first, std::size_t last) const {
    if (first > last || last > strokes_.size()) {
      throw ContractViolation("StrokeSet::slice: range out of bounds");
    }
    return {std::span<const CubicBezier<Scalar>>(strokes_.data() + first, last - first), first,
            strokes_.size(), mask_};
  }

  /// Flattened theta, stroke-major: x0 y0 x1 y1 x2 y2 x3 y3 [width] [opacity].
  ParamVector<Scalar> flatten() const {
    ParamVector<Scalar> theta(param_count());
    const int stride = mask_.params_per_stroke();
    for (std::size_t s = 0; s < strokes_.size(); ++s) {
      auto block = theta.segment(static_cast<Eigen::Index>(s) * stride, stride);
      for (int i = 0; i < 4; ++i) block.template segment<2>(2 * i) = strokes_[s].points[i];
      int k = 8;
      if (mask_.width) block[k++] = strokes_[s].width;
      if (mask_.opacity) block[k++] = strokes_[s].opacity;
    }
    return theta;
  }

  void unflatten(const ParamVector<Scalar>& theta) {
    if (theta.size() != param_count()) {
      throw ContractViolation("StrokeSet::unflatten: parameter count mismatch");
    }
    const int stride = mask_.params_per_stroke();
    for (std::size_t s = 0; s < strokes_.size(); ++s) {
      auto block = theta.segment(static_cast<Eigen::Index>(s) * stride, stride);
      for (int i = 0; i < 4; ++i) strokes_[s].points[i] = block.template segment<2>(2 * i);
      int k = 8;
      if (mask_.width) strokes_[s].width = block[k++];
      if (mask_.opacity) strokes_[s].opacity = block[k++];
    }
  }

  bool operator==(const StrokeSet& o) const {
    return mask_ == o.mask_ && strokes_ == o.strokes_;
  }

 private:
  std::vector<CubicBezier<Scalar>> strokes_;
  LearnableMask mask_;
};

/// K prompts and the cumulative stroke counts k_1 < ... < k_K = N.
struct PhasePlan {
  std::vector<std::size_t> boundaries;
  std::vector<std::string> prompts;

  std::size_t phase_count() const { return boundaries.size(); }
  std::size_t stroke_count() const { return boundaries.empty() ? 0 : boundaries.back(); }

  /// First stroke index of subset S_i (1-based phase index).
  std::size_t subset_begin(std::size_t phase) const {
    return phase <= 1 ? 0 : boundaries[phase - 2];
  }
  std::size_t subset_end(std::size_t phase) const { return boundaries[phase - 1]; }

  /// Throws ContractViolation describing the first broken invariant.
  void validate(std::size_t stroke_count) const {
    if (boundaries.size() < 2) {
      throw ContractViolation("boundaries must have at least two entries");
    }
    if (prompts.size() != boundaries.size()) {
      throw ContractViolation("prompts and boundaries must have the same length");
    }
    if (boundaries.front() < 1) throw ContractViolation("boundaries must be >= 1");
    for (std::size_t i = 1; i < boundaries.size(); ++i) {
      if (boundaries[i] <= boundaries[i - 1]) {
        throw ContractViolation("boundaries must be strictly increasing");
      }
    }
    if (boundaries.back() != stroke_count) {
      throw ContractViolation("last boundary must equal the stroke count");
    }
  }
};

/// S_{1:i}: the first k_i strokes, sharing storage with `set`.
template <typename Scalar>
StrokeView<Scalar> cumulative_subset(const StrokeSet<Scalar>& set, const PhasePlan& plan,
                                     std::size_t phase) {
  if (phase < 1 || phase > plan.phase_count()) {
    throw ContractViolation("cumulative_subset: phase index out of range");
  }
  return set.slice(0, plan.subset_end(phase));
}

/// S_i alone: strokes [k_{i-1}, k_i).
template <typename Scalar>
StrokeView<Scalar> phase_subset(const StrokeSet<Scalar>& set, const PhasePlan& plan,
                                std::size_t phase) {
  if (phase < 1 || phase > plan.phase_count()) {
    throw ContractViolation("phase_subset: phase index out of range");
  }
  return set.slice(plan.subset_begin(phase), plan.subset_end(phase));
}

}  // namespace strokeshift
