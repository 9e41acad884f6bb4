#pragma once

#include "svgp/math/linalg.hpp"
#include "svgp/math/random.hpp"
#include "svgp/model/state.hpp"

namespace svgp::model {

/// Per-latent-process quantities shared by every point of a batch: the
/// jittered Cholesky of K_zz, the projection columns A = K_zz^{-1} K_zx
/// and friends. Cached so one factorization serves the whole gradient
/// step.
struct LatentCache {
  Matrix k_zz;                 // Gram at the inducing inputs (no jitter)
  math::LowerTriangular l_zz;  // chol(K_zz + jitter I)
  double jitter = 0.0;
  Matrix k_zx;        // M x B
  Matrix a;           // M x B, columns a_jn
  Vector kxx_diag;    // B
  Vector ktilde_diag; // B, clamped at 0
  std::vector<Vector> alpha;   // per component: K_zz^{-1} m_kj
  std::vector<Matrix> sa;      // per component: S_kj A          (M x B)
  std::vector<Matrix> ksa;     // per component: K_zz^{-1} S_kj A (M x B)
};

/// Per-point diagonal marginals of the latent posterior for a batch,
/// per mixture component.
struct MarginalBatch {
  std::vector<Matrix> means;  // per component: B x Q
  std::vector<Matrix> vars;   // per component: B x Q, floored at 1e-12
  std::vector<LatentCache> cache;  // per latent process

  Index batch_size() const { return means.empty() ? 0 : means[0].rows(); }
  Index q() const { return means.empty() ? 0 : means[0].cols(); }
  Index k() const { return static_cast<Index>(means.size()); }
};

MarginalBatch conditional_marginals(const Matrix& x_batch,
                                    const ModelState& state, int workers = 1);

/// Latent draws f = mean + sqrt(var) * eps for each component, sample and
/// point, with the standard-normal draws retained for reparameterized
/// gradients.
struct LatentSamples {
  std::vector<std::vector<Matrix>> f;    // [K][B], each S x Q
  std::vector<std::vector<Matrix>> eps;  // [K][B], each S x Q
};

/// Draws for one point of the batch; the stream should already be the
/// per-point fork so that batching and parallelism do not change draws.
void sample_point(const MarginalBatch& marg, Index n, Index s,
                  const math::RandomStream& point_stream,
                  std::vector<Matrix>& f_out, std::vector<Matrix>& eps_out);

LatentSamples sample_latents(const MarginalBatch& marg, Index s,
                             const math::RandomStream& stream);

/// Full correlated posterior over the latent functions at the rows of X:
/// per component and latent process, mean A_j m_kj and covariance
/// Ktilde_j + A_j S_kj A_j^T.
struct FullPosterior {
  Vector weights;                          // K
  std::vector<std::vector<Vector>> means;  // [K][Q], each N
  std::vector<std::vector<Matrix>> covs;   // [K][Q], each N x N
};

FullPosterior full_posterior(const Matrix& x, const ModelState& state);

}  // namespace svgp::model
