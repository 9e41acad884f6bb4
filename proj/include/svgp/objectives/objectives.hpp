#pragma once

#include <vector>

#include "svgp/math/random.hpp"
#include "svgp/model/kl.hpp"
#include "svgp/model/marginals.hpp"
#include "svgp/model/state.hpp"

namespace svgp::obj {

struct McConfig {
  Index num_samples = 100;
  math::RandomStream stream;
};

struct Batch {
  Matrix x;                          // B x D
  std::vector<lik::Observation> y;   // B observations
  std::vector<Index> indices;        // dataset indices; key the noise streams

  Index size() const { return x.rows(); }
};

struct ObjectiveEstimate {
  double value = 0.0;
  double kl_value = 0.0;   // KL bound (zero for objectives without it)
  double lik_value = 0.0;  // scaled expected-log-likelihood part
  model::GradientRecord gradients;  // keyed by parameter group
  Index mc_samples_used = 0;
  std::vector<Index> batch_indices;
  Vector per_point_values;   // unscaled per-point contributions
  double lik_std_error = 0.0;
  long clamp_events = 0;
};

struct ObjectiveOptions {
  bool grad_theta = true;
  bool grad_lambda = true;
  bool grad_inducing = true;
  bool grad_likelihood = true;
  int workers = 1;

  static ObjectiveOptions none() {
    return {false, false, false, false, 1};
  }
};

/// Mini-batch reparameterized ELBO estimate with gradients for every
/// requested parameter group. n_total scales the expected-likelihood sum
/// up to the full dataset.
ObjectiveEstimate elbo_estimate(const Batch& batch,
                                const model::ModelState& state,
                                const McConfig& mc, Index n_total,
                                const ObjectiveOptions& opts = {});

/// Leave-one-out predictive objective (batch mean); gradients cover the
/// kernel hyperparameters, plus the inducing inputs when requested. The
/// variational parameters are held fixed.
ObjectiveEstimate loo_estimate(const Batch& batch,
                               const model::ModelState& state,
                               const McConfig& mc,
                               const ObjectiveOptions& opts = {});

/// Score-function (log-derivative) estimator of the expected-likelihood
/// gradient with respect to the variational parameters, using the same
/// draws as the reparameterized path; no variance reduction. The returned
/// "lambda" gradient covers the likelihood term only (no KL part).
ObjectiveEstimate score_function_gradient(const Batch& batch,
                                          const model::ModelState& state,
                                          const McConfig& mc, Index n_total,
                                          const ObjectiveOptions& opts = {});

/// Reparameterized counterpart of score_function_gradient: the same
/// likelihood-term-only lambda gradient, for paired variance studies.
ObjectiveEstimate reparam_likelihood_gradient(const Batch& batch,
                                              const model::ModelState& state,
                                              const McConfig& mc, Index n_total,
                                              const ObjectiveOptions& opts = {});

}  // namespace svgp::obj
