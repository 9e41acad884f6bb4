#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "svgp/math/linalg.hpp"
#include "svgp/math/random.hpp"

using namespace svgp;
using namespace svgp::math;

namespace {

Matrix random_spd(RandomStream& rng, Index n, double cond) {
  // orthogonal basis from QR of a random matrix, spectrum in [1/cond, 1]
  Matrix A(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) A(i, j) = rng.next_normal();
  Eigen::HouseholderQR<Matrix> qr(A);
  Matrix Q = qr.householderQ();
  Vector evals(n);
  for (Index i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
    evals[i] = std::pow(cond, -t);
  }
  return Q * evals.asDiagonal() * Q.transpose();
}

}  // namespace

TEST_CASE("cholesky identity") {
  Matrix I = Matrix::Identity(3, 3);
  auto L = cholesky(I);
  CHECK((L.m - I).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("cholesky 2x2 reconstructs") {
  Matrix m(2, 2);
  m << 4, 2, 2, 3;
  auto L = cholesky(m);
  CHECK(L.m(0, 0) == doctest::Approx(2.0));
  CHECK(L.m(1, 0) == doctest::Approx(1.0));
  CHECK(L.m(1, 1) == doctest::Approx(std::sqrt(2.0)));
  CHECK(L.m(0, 1) == 0.0);
  Matrix rec = L.m * L.m.transpose();
  CHECK((rec - m).norm() / m.norm() < 1e-12);
}

TEST_CASE("cholesky rejects indefinite") {
  Matrix m(2, 2);
  m << 1, 2, 2, 1;  // eigenvalues 3 and -1
  CHECK_THROWS_AS(cholesky(m), NotPositiveDefinite);
}

TEST_CASE("cholesky reconstruction property across sizes") {
  RandomStream rng(7, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.next_u64() % 49);
    const double cond = std::pow(10.0, 1 + (trial % 7));
    Matrix m = random_spd(rng, n, cond);
    auto L = cholesky(m);
    const double rel = (L.m * L.m.transpose() - m).norm() / m.norm();
    CHECK(rel < 1e-10);
  }
}

TEST_CASE("jittered cholesky applies base jitter") {
  Matrix I = Matrix::Identity(2, 2);
  auto [L, used] = jittered_cholesky(I, 1e-6);
  CHECK(used == doctest::Approx(1e-6));
  CHECK(L.m(0, 0) == doctest::Approx(std::sqrt(1.0 + 1e-6)));
}

TEST_CASE("jittered cholesky escalates on rank-1") {
  RandomStream rng(3, 0);
  Vector v = draw_standard_normals(rng, 6);
  v.normalize();
  Matrix m = v * v.transpose();
  auto [L, used] = jittered_cholesky(m, 1e-6);
  CHECK(used <= 1e-3);
  CHECK((L.m * L.m.transpose() - m).cwiseAbs().maxCoeff() < 2e-3);
}

TEST_CASE("jittered cholesky rejects NaN") {
  Matrix m = Matrix::Constant(3, 3, std::nan(""));
  CHECK_THROWS_AS(jittered_cholesky(m, 1e-6), NotPositiveDefinite);
}

TEST_CASE("tri_solve identity and hand case") {
  LowerTriangular I{Matrix::Identity(3, 3)};
  Matrix b(3, 1);
  b << 1, 2, 3;
  CHECK((tri_solve(I, b) - b).norm() == doctest::Approx(0.0));

  LowerTriangular L{Matrix::Zero(2, 2)};
  L.m << 2, 0, 1, 1;
  Matrix b2(2, 1);
  b2 << 2, 3;
  Matrix x = tri_solve(L, b2);
  CHECK(x(0, 0) == doctest::Approx(1.0));
  CHECK(x(1, 0) == doctest::Approx(2.0));

  Matrix bad(3, 1);
  CHECK_THROWS_AS(tri_solve(L, bad), DimensionMismatch);
}

TEST_CASE("chol_solve matches direct inverse") {
  RandomStream rng(11, 2);
  for (int trial = 0; trial < 10; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.next_u64() % 19);
    Matrix m = random_spd(rng, n, 1e4);
    Matrix b(n, 2);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < 2; ++j) b(i, j) = rng.next_normal();
    auto L = cholesky(m);
    Matrix x = chol_solve(L, b);
    Matrix x_ref = m.inverse() * b;
    CHECK((x - x_ref).norm() / x_ref.norm() < 1e-8);
  }
}

TEST_CASE("logsumexp basics") {
  CHECK(logsumexp(Vector::Zero(2)) == doctest::Approx(std::log(2.0)));
  Vector v = Vector::Constant(2, -1000.0);
  CHECK(logsumexp(v) == doctest::Approx(-1000.0 + std::log(2.0)));
  Vector single = Vector::Constant(1, 3.0);
  CHECK(logsumexp(single) == 3.0);
  Vector empty(0);
  CHECK_THROWS(logsumexp(empty));
}

TEST_CASE("logsumexp shift invariance") {
  RandomStream rng(5, 9);
  for (int trial = 0; trial < 20; ++trial) {
    Vector v = draw_standard_normals(rng, 8) * 10.0;
    const double c = rng.next_normal() * 100.0;
    CHECK(logsumexp(Vector(v.array() + c)) ==
          doctest::Approx(logsumexp(v) + c).epsilon(1e-12));
  }
}

TEST_CASE("normal draws are deterministic per stream") {
  RandomStream a(42, 7), b(42, 7);
  Vector va = draw_standard_normals(a, 100);
  Vector vb = draw_standard_normals(b, 100);
  CHECK((va - vb).cwiseAbs().maxCoeff() == 0.0);

  RandomStream c(42, 8);
  Vector vc = draw_standard_normals(c, 100);
  CHECK((va - vc).cwiseAbs().maxCoeff() > 0.0);

  RandomStream d(42, 7);
  CHECK(draw_standard_normals(d, 0).size() == 0);
}

TEST_CASE("normal draws have the right moments") {
  RandomStream rng(2024, 0);
  const Index n = 100000;
  Vector v = draw_standard_normals(rng, n);
  const double mean = v.mean();
  const double var = (v.array() - mean).square().sum() / (n - 1);
  CHECK(mean > -0.02);
  CHECK(mean < 0.02);
  CHECK(var > 0.98);
  CHECK(var < 1.02);
}

TEST_CASE("distinct stream ids look independent (two-sample KS)") {
  const int n = 10000;
  RandomStream a(99, 1), b(99, 2);
  std::vector<double> ua(n), ub(n);
  for (int i = 0; i < n; ++i) {
    ua[i] = a.next_uniform();
    ub[i] = b.next_uniform();
  }
  std::sort(ua.begin(), ua.end());
  std::sort(ub.begin(), ub.end());
  // two-sample KS statistic
  double d = 0.0;
  size_t i = 0, j = 0;
  while (i < ua.size() && j < ub.size()) {
    if (ua[i] <= ub[j]) ++i; else ++j;
    d = std::max(d, std::abs(double(i) / n - double(j) / n));
  }
  const double en = std::sqrt(n / 2.0);
  const double lambda = (en + 0.12 + 0.11 / en) * d;
  double p = 0.0;  // Kolmogorov asymptotic series
  for (int k = 1; k <= 100; ++k) {
    p += 2.0 * std::pow(-1.0, k - 1) * std::exp(-2.0 * k * k * lambda * lambda);
  }
  CHECK(p > 0.001);

  // and essentially uncorrelated
  double corr = 0.0;
  RandomStream a2(99, 1), b2(99, 2);
  for (int k = 0; k < n; ++k) {
    corr += (a2.next_uniform() - 0.5) * (b2.next_uniform() - 0.5);
  }
  corr /= n * (1.0 / 12.0);
  CHECK(std::abs(corr) < 0.05);
}

TEST_CASE("fork yields independent child streams") {
  RandomStream base(1, 0);
  RandomStream c1 = base.fork(1);
  RandomStream c2 = base.fork(2);
  Vector v1 = draw_standard_normals(c1, 50);
  Vector v2 = draw_standard_normals(c2, 50);
  CHECK((v1 - v2).cwiseAbs().maxCoeff() > 1e-8);
  RandomStream c1b = base.fork(1);
  CHECK((draw_standard_normals(c1b, 50) - v1).cwiseAbs().maxCoeff() == 0.0);
}
