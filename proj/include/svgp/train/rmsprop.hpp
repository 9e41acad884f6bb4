#pragma once

#include <map>
#include <string>

#include "svgp/common.hpp"
#include "svgp/model/state.hpp"

namespace svgp::train {

/// RMSProp in ascent form: acc <- 0.9 acc + 0.1 g^2,
/// param <- param + alpha * g / sqrt(acc + 1e-8).
struct RmsPropState {
  double learning_rate = 0.003;
  std::map<std::string, Vector> accumulators;  // keyed like the gradients
  long step_count = 0;
  long skipped_updates = 0;  // non-finite gradients encountered

  static constexpr double kDecay = 0.9;
  static constexpr double kEpsilon = 1e-8;
};

/// Applies one step for every group present in `grads`; groups without a
/// gradient are left untouched. Non-finite gradient vectors skip the
/// update for that group (counted).
void rmsprop_step(model::ModelState& state, const model::GradientRecord& grads,
                  RmsPropState& opt);

/// Flat-vector core used by the state-level step and the unit tests.
void rmsprop_step_vector(Vector& params, const Vector& grad, Vector& acc,
                         double learning_rate);

}  // namespace svgp::train
