#pragma once

#include <string>
#include <vector>

#include "svgp/common.hpp"

namespace svgp::kernels {

enum class Kind { RbfArd, RbfIso, ArcCosine };

Kind kind_from_string(const std::string& s);
std::string kind_to_string(Kind k);

/// One covariance function with its hyperparameters. RBF variants expose
/// log-variance plus log-lengthscales (one per input dimension, or a
/// single tied value for the isotropic kind) as unconstrained trainable
/// parameters. The arc-cosine kernel has fixed structural degree/depth
/// and exposes only a log output scale.
class Kernel {
 public:
  Kernel() = default;

  static Kernel rbf_ard(Index dim, double log_variance = 0.0,
                        double log_lengthscale = 0.0);
  static Kernel rbf_iso(Index dim, double log_variance = 0.0,
                        double log_lengthscale = 0.0);
  static Kernel arc_cosine(Index dim, int degree, int depth,
                           double log_variance = 0.0);

  Kind kind() const { return kind_; }
  Index input_dim() const { return dim_; }
  int degree() const { return degree_; }
  int depth() const { return depth_; }

  double eval(const Eigen::Ref<const Vector>& x,
              const Eigen::Ref<const Vector>& x2) const;

  /// Gram matrix between the rows of X1 and X2.
  Matrix gram(const Matrix& X1, const Matrix& X2) const;
  /// Symmetric Gram of X against itself (exactly symmetric by construction).
  Matrix gram(const Matrix& X) const;
  /// Diagonal of gram(X): kappa(x_n, x_n) per row.
  Vector gram_diag(const Matrix& X) const;

  // --- trainable hyperparameters (unconstrained log space) ---
  Index num_params() const;
  Vector pack_params() const;
  void unpack_params(const Eigen::Ref<const Vector>& p);
  std::vector<std::string> param_names() const;

  /// dK/d(eta) for each unconstrained parameter, as dense matrices.
  std::vector<Matrix> gram_grad(const Matrix& X1, const Matrix& X2) const;

  /// sum_ab W_ab dK_ab/d(eta) per parameter; the contraction form used by
  /// the objective gradients so ARD in high dimension never materializes
  /// per-parameter matrices. K is gram(X1, X2), passed in to avoid
  /// recomputation.
  Vector gram_grad_contract(const Matrix& X1, const Matrix& X2,
                            const Matrix& K, const Matrix& W) const;

  /// sum_n w_n d kappa(x_n, x_n)/d(eta) per parameter.
  Vector diag_grad_contract(const Matrix& X, const Vector& diag,
                            const Vector& w) const;

  /// d/dX1 of sum_nm U_nm kappa(x1_n, x2_m): an N1 x D matrix. K is
  /// gram(X1, X2). Used for inducing-input gradients.
  Matrix grad_x1_contract(const Matrix& X1, const Matrix& X2, const Matrix& K,
                          const Matrix& U) const;

 private:
  Kind kind_ = Kind::RbfArd;
  Index dim_ = 0;
  double log_variance_ = 0.0;
  Vector log_lengthscales_;  // D entries (ARD) or 1 entry (isotropic)
  int degree_ = 1;           // arc-cosine only
  int depth_ = 1;            // arc-cosine only

  Vector lengthscales() const;  // broadcast to D entries
  Matrix scaled(const Matrix& X) const;
  double rbf_eval(const Eigen::Ref<const Vector>& x,
                  const Eigen::Ref<const Vector>& x2) const;
  double arc_eval(const Eigen::Ref<const Vector>& x,
                  const Eigen::Ref<const Vector>& x2) const;
};

}  // namespace svgp::kernels
