#pragma once

#include <string>
#include <vector>

#include "svgp/model/state.hpp"
#include "svgp/objectives/objectives.hpp"

namespace svgp::train {

struct GradCheckGroup {
  std::string objective;  // "elbo" or "loo"
  std::string group;
  double worst_rel_err = 0.0;
  Index worst_index = -1;
  Index params_checked = 0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  bool pass = true;
};

/// Central finite differences under common random numbers against the
/// analytic gradients of both objectives. `corrupt_group` perturbs the
/// analytic gradient of that group (fault-injection hook for tests).
GradCheckReport run_gradcheck(const model::ModelState& state,
                              const obj::Batch& batch, Index n_total,
                              Index mc_samples, std::uint64_t seed,
                              double tol_rel = 1e-4, double tol_abs = 1e-6,
                              const std::string& corrupt_group = "");

}  // namespace svgp::train
