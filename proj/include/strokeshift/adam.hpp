#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>

#include "strokeshift/errors.hpp"
#include "strokeshift/geometry.hpp"

namespace strokeshift {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
struct AdamState {
  ParamVector<Scalar> first_moment;
  ParamVector<Scalar> second_moment;
  std::int64_t step = 0;

  static AdamState zeros(Eigen::Index n) {
    return {ParamVector<Scalar>::Zero(n), ParamVector<Scalar>::Zero(n), 0};
  }
};

/// One bias-corrected Adam update. `learning_rates` is per parameter.
template <typename Scalar>
void adam_step(ParamVector<Scalar>& theta, const ParamVector<Scalar>& grads,
               const ParamVector<Scalar>& learning_rates, AdamState<Scalar>& state,
               const AdamConfig& cfg) {
  const Eigen::Index n = theta.size();
  if (grads.size() != n || learning_rates.size() != n || state.first_moment.size() != n ||
      state.second_moment.size() != n) {
    throw ContractViolation("adam_step: parameter, gradient and state sizes differ");
  }
  if (!grads.allFinite()) throw NonFiniteError("adam_step: non-finite gradient");

  const Scalar b1 = Scalar(cfg.beta1);
  const Scalar b2 = Scalar(cfg.beta2);
  ++state.step;
  state.first_moment = b1 * state.first_moment + (Scalar(1) - b1) * grads;
  state.second_moment =
      b2 * state.second_moment + (Scalar(1) - b2) * grads.cwiseAbs2();
  const Scalar c1 = Scalar(1) - std::pow(b1, Scalar(state.step));
  const Scalar c2 = Scalar(1) - std::pow(b2, Scalar(state.step));
  theta.array() -= learning_rates.array() * (state.first_moment.array() / c1) /
                   ((state.second_moment.array() / c2).sqrt() + Scalar(cfg.eps));
}

template <typename Scalar>
void adam_step(ParamVector<Scalar>& theta, const ParamVector<Scalar>& grads,
               Scalar learning_rate, AdamState<Scalar>& state, const AdamConfig& cfg) {
  const ParamVector<Scalar> rates = ParamVector<Scalar>::Constant(theta.size(), learning_rate);
  adam_step(theta, grads, rates, state, cfg);
}

}  // namespace strokeshift
