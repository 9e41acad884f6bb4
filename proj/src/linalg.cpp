#include "svgp/math/linalg.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

namespace svgp::math {

double LowerTriangular::log_det_of_product() const {
  return 2.0 * m.diagonal().array().log().sum();
}

LowerTriangular cholesky(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw DimensionMismatch("cholesky: matrix is not square (" +
                            std::to_string(m.rows()) + " x " +
                            std::to_string(m.cols()) + ")");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (!m.allFinite()) {
    throw NotPositiveDefinite("cholesky: non-finite entries");
  }
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * scale) {
    throw DimensionMismatch("cholesky: matrix is not symmetric (max |m - m^T| = " +
                            std::to_string(asym) + ")");
  }

  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("cholesky: matrix is not positive definite");
  }
  LowerTriangular out{llt.matrixL()};
  if (!out.m.diagonal().allFinite() || (out.m.diagonal().array() <= 0.0).any()) {
    throw NotPositiveDefinite("cholesky: non-positive pivot");
  }
  return out;
}

std::pair<LowerTriangular, double> jittered_cholesky(const Matrix& m,
                                                     double base_jitter) {
  if (base_jitter <= 0.0) {
    throw std::invalid_argument("jittered_cholesky: base_jitter must be > 0");
  }
  double jitter = base_jitter;
  for (int attempt = 0; attempt < 7; ++attempt, jitter *= 10.0) {
    Matrix jittered = m;
    jittered.diagonal().array() += jitter;
    try {
      return {cholesky(jittered), jitter};
    } catch (const NotPositiveDefinite&) {
      // escalate
    }
  }
  throw NotPositiveDefinite(
      "jittered_cholesky: factorization failed after 7 jitter escalations "
      "(base " + std::to_string(base_jitter) + ")");
}

Matrix tri_solve(const LowerTriangular& L, const Matrix& b, bool transpose) {
  if (L.dim() != b.rows()) {
    throw DimensionMismatch("tri_solve: L is " + std::to_string(L.dim()) +
                            "-dimensional but b has " + std::to_string(b.rows()) +
                            " rows");
  }
  if (transpose) {
    return L.m.transpose().triangularView<Eigen::Upper>().solve(b);
  }
  return L.m.triangularView<Eigen::Lower>().solve(b);
}

Matrix chol_solve(const LowerTriangular& L, const Matrix& b) {
  return tri_solve(L, tri_solve(L, b, false), true);
}

double logsumexp(std::span<const double> values) {
  if (values.empty()) {
    throw std::invalid_argument("logsumexp: empty list");
  }
  const double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) {
    return m;  // all -inf stays -inf; a NaN/inf propagates
  }
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - m);
  return m + std::log(acc);
}

double logsumexp(const Vector& values) {
  return logsumexp(std::span<const double>(values.data(),
                                           static_cast<size_t>(values.size())));
}

}  // namespace svgp::math
