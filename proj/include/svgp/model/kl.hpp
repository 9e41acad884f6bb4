#pragma once

#include "svgp/model/marginals.hpp"
#include "svgp/model/state.hpp"

namespace svgp::model {

/// Gradients of the KL bound. Mean/factor entries are in raw space (the
/// factor diagonal still needs the log-diagonal chain applied); kzz_weight
/// gives d(bound)/d(theta or Z) through tr(dK_zz * kzz_weight_j).
struct KlGradients {
  Vector logits;                             // K
  std::vector<std::vector<Vector>> means;    // [K][Q] M
  std::vector<std::vector<Matrix>> factors;  // [K][Q] M x M (lower)
  std::vector<Matrix> kzz_weight;            // [Q] M x M
};

struct KlResult {
  double value = 0.0;
  KlGradients grads;
  bool has_grads = false;
};

/// Upper bound on KL[q(u | lambda) || p(u)]. The cross-entropy term
/// -E_q[log p(u)] is exact; the mixture entropy is lower-bounded by the
/// tighter of the pairwise-convolution (Jensen) bound and the conditional
/// entropy sum_k pi_k H[q_k]. The conditional branch makes the bound the
/// exact Gaussian KL at K = 1 and collapses duplicated components exactly.
KlResult kl_bound(const ModelState& state, const std::vector<LatentCache>& cache,
                  bool with_grads, bool with_kernel_grads);

/// Convenience form that factorizes K_zz itself.
double kl_bound(const ModelState& state);

}  // namespace svgp::model
