#include "svgp/train/rmsprop.hpp"

#include <cmath>

namespace svgp::train {

void rmsprop_step_vector(Vector& params, const Vector& grad, Vector& acc,
                         double learning_rate) {
  acc = RmsPropState::kDecay * acc + (1.0 - RmsPropState::kDecay) * grad.cwiseAbs2();
  params += learning_rate *
            grad.cwiseQuotient((acc.array() + RmsPropState::kEpsilon).sqrt().matrix());
}

void rmsprop_step(model::ModelState& state, const model::GradientRecord& grads,
                  RmsPropState& opt) {
  for (const auto& [group, grad] : grads) {
    Vector& acc = opt.accumulators
                      .try_emplace(group, Vector::Zero(grad.size()))
                      .first->second;
    if (acc.size() != grad.size()) {
      throw DimensionMismatch("rmsprop: accumulator size mismatch for " + group);
    }
    if (!grad.allFinite()) {
      ++opt.skipped_updates;
      acc *= RmsPropState::kDecay;  // decay still applies, update skipped
      continue;
    }
    Vector params = state.get_group(group);
    rmsprop_step_vector(params, grad, acc, opt.learning_rate);
    state.set_group(group, params);
  }
  ++opt.step_count;
}

}  // namespace svgp::train
