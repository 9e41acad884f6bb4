#pragma once

#include <map>
#include <string>
#include <vector>

#include "svgp/common.hpp"
#include "svgp/kernels/kernel.hpp"
#include "svgp/likelihoods/likelihood.hpp"

namespace svgp::model {

/// Inducing inputs, either one matrix shared across all latent processes
/// or one per process.
struct InducingSet {
  std::vector<Matrix> z;  // size 1 when shared, else Q
  bool shared = true;

  Index m() const { return z.empty() ? 0 : z[0].rows(); }
  const Matrix& for_latent(Index j) const { return shared ? z[0] : z[j]; }
  Matrix& for_latent(Index j) { return shared ? z[0] : z[j]; }
  Index count() const { return static_cast<Index>(z.size()); }
};

/// Mixture-of-Gaussians variational posterior over the inducing variables:
/// component weights via softmax(logits), means m_kj e Cholesky factors
/// L_kj with S_kj = L_kj L_kj^T. Factors keep a positive diagonal; the
/// unconstrained view stores log-diagonal entries.
struct MixturePosterior {
  Vector logits;                           // K
  std::vector<std::vector<Vector>> means;  // [K][Q], each M
  std::vector<std::vector<Matrix>> factors;  // [K][Q], each M x M lower

  Index k() const { return logits.size(); }
  Vector weights() const;  // softmax(logits)
};

/// Parameter groups used for gradient records, the optimizer and
/// checkpoints.
namespace groups {
inline constexpr const char* kTheta = "theta";
inline constexpr const char* kLambda = "lambda";
inline constexpr const char* kInducing = "inducing";
inline constexpr const char* kLikelihood = "likelihood";
}  // namespace groups

using GradientRecord = std::map<std::string, Vector>;

struct ModelState {
  std::vector<kernels::Kernel> kernels;  // one per latent process
  InducingSet inducing;
  MixturePosterior posterior;
  lik::Likelihood likelihood;
  double jitter_scale = 1e-6;  // relative to the mean K_zz diagonal

  Index q() const { return static_cast<Index>(kernels.size()); }
  Index m() const { return inducing.m(); }
  Index d() const { return kernels.empty() ? 0 : kernels[0].input_dim(); }
  Index k() const { return posterior.k(); }

  /// Fresh state with m_kj = 0, L_kj = I, logits = 0.
  static ModelState init(std::vector<kernels::Kernel> kernels,
                         InducingSet inducing, Index k_components,
                         lik::Likelihood likelihood);

  void validate() const;

  // --- flat unconstrained parameter views per group ---
  Index group_size(const std::string& group) const;
  Vector get_group(const std::string& group) const;
  void set_group(const std::string& group, const Eigen::Ref<const Vector>& v);
  std::vector<std::string> group_names() const;
};

}  // namespace svgp::model
