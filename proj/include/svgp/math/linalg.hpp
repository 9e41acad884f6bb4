#pragma once

#include <span>
#include <utility>

#include "svgp/common.hpp"

namespace svgp::math {

/// Lower-triangular Cholesky factor with strictly positive diagonal.
struct LowerTriangular {
  Matrix m;  // strictly-upper entries are zero

  Index dim() const { return m.rows(); }
  double log_det_of_product() const;  // log|L L^T| = 2 sum log diag
};

/// Cholesky factorization of a symmetric positive-definite matrix.
/// Throws NotPositiveDefinite when a pivot fails (the caller may retry
/// with jitter), DimensionMismatch when the input is not square or not
/// symmetric to 1e-10 relative.
LowerTriangular cholesky(const Matrix& m);

/// Cholesky with escalating diagonal jitter: tries
/// m + base_jitter * 10^t * I for t = 0..6 and returns the factor along
/// with the jitter that succeeded. Throws NotPositiveDefinite after the
/// final escalation.
std::pair<LowerTriangular, double> jittered_cholesky(const Matrix& m,
                                                     double base_jitter);

/// Solves L x = b (or L^T x = b when transpose) by substitution.
Matrix tri_solve(const LowerTriangular& L, const Matrix& b,
                 bool transpose = false);

/// Solves (L L^T) x = b, i.e. a full SPD solve through the factor.
Matrix chol_solve(const LowerTriangular& L, const Matrix& b);

/// log sum_i exp(v_i) via max shift. Throws on an empty list.
double logsumexp(std::span<const double> values);
double logsumexp(const Vector& values);

}  // namespace svgp::math
