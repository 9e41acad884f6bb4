#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "svgp/kernels/kernel.hpp"
#include "svgp/math/random.hpp"

using namespace svgp;
using namespace svgp::kernels;
using svgp::math::RandomStream;
using svgp::math::draw_standard_normals;

namespace {

Matrix random_inputs(RandomStream& rng, Index n, Index d, bool unit_sphere = false) {
  Matrix X(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) X(i, j) = rng.next_normal();
    if (unit_sphere) X.row(i) /= X.row(i).norm();
  }
  return X;
}

double min_eig_sym(const Matrix& K) {
  Matrix S = 0.5 * (K + K.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  return es.eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("rbf spot values") {
  auto k = Kernel::rbf_ard(3, std::log(2.5), 0.0);
  Vector x(3), y(3);
  x << 1, 2, 3;
  y = x;
  CHECK(k.eval(x, y) == doctest::Approx(2.5));

  auto k1 = Kernel::rbf_ard(3, 0.0, 0.0);
  y[0] += 1.0;  // unit distance
  CHECK(k1.eval(x, y) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

  auto kflat = Kernel::rbf_ard(3, 0.0, std::log(1e8));
  Vector z(3);
  z << -40, 55, 12;
  CHECK(kflat.eval(x, z) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("rbf symmetry is exact") {
  RandomStream rng(1, 1);
  auto k = Kernel::rbf_ard(4, 0.3, -0.2);
  for (int t = 0; t < 20; ++t) {
    Vector x = draw_standard_normals(rng, 4);
    Vector y = draw_standard_normals(rng, 4);
    CHECK(k.eval(x, y) == k.eval(y, x));
  }
}

TEST_CASE("ard with equal lengthscales matches isotropic") {
  RandomStream rng(2, 1);
  auto ka = Kernel::rbf_ard(5, 0.1, -0.4);
  auto ki = Kernel::rbf_iso(5, 0.1, -0.4);
  Matrix X = random_inputs(rng, 8, 5);
  Matrix Ka = ka.gram(X), Ki = ki.gram(X);
  CHECK((Ka - Ki).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("arc-cosine spot values") {
  Vector x(2), y(2);
  x << 1, 0;
  y << 0, 1;  // orthogonal
  auto k0 = Kernel::arc_cosine(2, 0, 1);
  CHECK(k0.eval(x, y) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(k0.eval(x, x) == doctest::Approx(1.0).epsilon(1e-12));

  auto k1 = Kernel::arc_cosine(2, 1, 1);
  Vector v(2);
  v << 1.5, -0.7;
  CHECK(k1.eval(v, v) == doctest::Approx(v.squaredNorm()).epsilon(1e-12));

  Vector zero = Vector::Zero(2);
  CHECK_THROWS_AS(k0.eval(x, zero), NumericalError);
}

TEST_CASE("arc-cosine diagonal is finite and positive at all depths") {
  RandomStream rng(3, 3);
  for (int d = 0; d <= 2; ++d) {
    for (int l = 1; l <= 4; ++l) {
      auto k = Kernel::arc_cosine(3, d, l);
      for (int t = 0; t < 5; ++t) {
        Vector x = draw_standard_normals(rng, 3);
        const double v = k.eval(x, x);
        CHECK(std::isfinite(v));
        CHECK(v > 0.0);
      }
    }
  }
}

TEST_CASE("arc-cosine output scale multiplies the kernel") {
  Vector x(2), y(2);
  x << 1, 0;
  y << 0, 1;
  auto k = Kernel::arc_cosine(2, 0, 2, std::log(3.0));
  auto k0 = Kernel::arc_cosine(2, 0, 2, 0.0);
  CHECK(k.eval(x, y) == doctest::Approx(3.0 * k0.eval(x, y)).epsilon(1e-12));
}

TEST_CASE("gram basics and PSD") {
  RandomStream rng(4, 0);
  auto k = Kernel::rbf_ard(2, std::log(1.7), 0.0);
  Matrix one = random_inputs(rng, 1, 2);
  Matrix K1 = k.gram(one);
  CHECK(K1.rows() == 1);
  CHECK(K1(0, 0) == doctest::Approx(1.7));

  Matrix X3 = random_inputs(rng, 3, 2);
  Matrix K3 = k.gram(X3);
  CHECK((K3 - K3.transpose()).cwiseAbs().maxCoeff() == 0.0);
  for (Index i = 0; i < 3; ++i) CHECK(K3(i, i) == doctest::Approx(1.7));
  CHECK(min_eig_sym(K3) >= -1e-10);

  auto karc = Kernel::arc_cosine(5, 1, 3);
  Matrix Xs = random_inputs(rng, 20, 5, true);
  Matrix Ka = karc.gram(Xs);
  CHECK((Ka - Ka.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(min_eig_sym(Ka) >= -1e-8);
}

TEST_CASE("gram dimension mismatch") {
  auto k = Kernel::rbf_ard(3, 0, 0);
  Matrix X(2, 2);
  CHECK_THROWS_AS(k.gram(X, X), DimensionMismatch);
}

TEST_CASE("PSD property over random sets, both kernels") {
  RandomStream rng(5, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const Index n = 5 + static_cast<Index>(rng.next_u64() % 46);
    Matrix X = random_inputs(rng, n, 3);
    auto kr = Kernel::rbf_ard(3, 0.2, -0.1);
    Matrix K = kr.gram(X);
    CHECK(min_eig_sym(K) >= -1e-8 * K.trace() / n);

    auto ka = Kernel::arc_cosine(3, trial % 3, 1 + trial % 3);
    Matrix Ka = ka.gram(X);
    CHECK(min_eig_sym(Ka) >= -1e-8 * Ka.trace() / n);
  }
}

TEST_CASE("gram_grad scale identities") {
  RandomStream rng(6, 0);
  Matrix X = random_inputs(rng, 5, 2);
  auto k = Kernel::rbf_ard(2, 0.4, 0.1);
  auto grads = k.gram_grad(X, X);
  CHECK((grads[0] - k.gram(X, X)).cwiseAbs().maxCoeff() < 1e-14);

  auto ka = Kernel::arc_cosine(2, 1, 2, 0.3);
  auto ga = ka.gram_grad(X, X);
  CHECK(ga.size() == 1);
  CHECK((ga[0] - ka.gram(X, X)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("gram_grad matches finite differences") {
  RandomStream rng(7, 0);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix X1 = random_inputs(rng, 5, 3);
    Matrix X2 = random_inputs(rng, 4, 3);
    std::vector<Kernel> kernels{
        Kernel::rbf_ard(3, 0.2 * rng.next_normal(), 0.2 * rng.next_normal()),
        Kernel::rbf_iso(3, 0.2 * rng.next_normal(), 0.2 * rng.next_normal()),
        Kernel::arc_cosine(3, trial % 3, 1 + trial % 3, 0.2 * rng.next_normal())};
    for (auto& k : kernels) {
      auto grads = k.gram_grad(X1, X2);
      Vector p0 = k.pack_params();
      const double h = 1e-5;
      for (Index pi = 0; pi < p0.size(); ++pi) {
        Vector pp = p0, pm = p0;
        pp[pi] += h;
        pm[pi] -= h;
        Kernel kp = k, km = k;
        kp.unpack_params(pp);
        km.unpack_params(pm);
        Matrix fd = (kp.gram(X1, X2) - km.gram(X1, X2)) / (2 * h);
        const double scale = std::max(1e-6, fd.cwiseAbs().maxCoeff());
        CHECK((fd - grads[pi]).cwiseAbs().maxCoeff() / scale < 1e-6);
      }
    }
  }
}

TEST_CASE("gram_grad_contract agrees with materialized gradients") {
  RandomStream rng(8, 0);
  Matrix X1 = random_inputs(rng, 6, 3);
  Matrix X2 = random_inputs(rng, 4, 3);
  Matrix W = random_inputs(rng, 6, 4);
  std::vector<Kernel> kernels{Kernel::rbf_ard(3, 0.1, -0.3),
                              Kernel::rbf_iso(3, 0.1, -0.3),
                              Kernel::arc_cosine(3, 1, 2, 0.2)};
  for (auto& k : kernels) {
    Matrix K = k.gram(X1, X2);
    Vector c = k.gram_grad_contract(X1, X2, K, W);
    auto grads = k.gram_grad(X1, X2);
    for (size_t pi = 0; pi < grads.size(); ++pi) {
      CHECK(c[pi] == doctest::Approx(W.cwiseProduct(grads[pi]).sum()).epsilon(1e-9));
    }
  }
}

TEST_CASE("diag_grad_contract matches finite differences") {
  RandomStream rng(9, 0);
  Matrix X = random_inputs(rng, 5, 3);
  Vector w = draw_standard_normals(rng, 5);
  std::vector<Kernel> kernels{Kernel::rbf_ard(3, 0.1, -0.3),
                              Kernel::arc_cosine(3, 2, 2, 0.2)};
  for (auto& k : kernels) {
    Vector c = k.diag_grad_contract(X, k.gram_diag(X), w);
    Vector p0 = k.pack_params();
    const double h = 1e-5;
    for (Index pi = 0; pi < p0.size(); ++pi) {
      Vector pp = p0, pm = p0;
      pp[pi] += h;
      pm[pi] -= h;
      Kernel kp = k, km = k;
      kp.unpack_params(pp);
      km.unpack_params(pm);
      const double fd = w.dot(kp.gram_diag(X) - km.gram_diag(X)) / (2 * h);
      CHECK(c[pi] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("grad_x1_contract matches finite differences") {
  RandomStream rng(10, 0);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix X1 = random_inputs(rng, 4, 3);
    Matrix X2 = random_inputs(rng, 5, 3);
    Matrix U = random_inputs(rng, 4, 5);
    std::vector<Kernel> kernels{Kernel::rbf_ard(3, 0.1, -0.2),
                                Kernel::arc_cosine(3, 1, 2, 0.1),
                                Kernel::arc_cosine(3, 2, 3, -0.1)};
    for (auto& k : kernels) {
      Matrix K = k.gram(X1, X2);
      Matrix G = k.grad_x1_contract(X1, X2, K, U);
      const double h = 1e-6;
      for (Index i = 0; i < X1.rows(); ++i) {
        for (Index d = 0; d < 3; ++d) {
          Matrix Xp = X1, Xm = X1;
          Xp(i, d) += h;
          Xm(i, d) -= h;
          const double fd =
              (U.cwiseProduct(k.gram(Xp, X2)).sum() -
               U.cwiseProduct(k.gram(Xm, X2)).sum()) / (2 * h);
          CHECK(G(i, d) == doctest::Approx(fd).epsilon(5e-5));
        }
      }
    }
  }
}

TEST_CASE("grad_x1_contract handles the symmetric Z,Z case") {
  RandomStream rng(11, 0);
  Matrix Z = random_inputs(rng, 4, 2);
  Matrix W = random_inputs(rng, 4, 4);
  auto k = Kernel::arc_cosine(2, 1, 2, 0.0);
  Matrix K = k.gram(Z);
  Matrix U = W + W.transpose();
  Matrix G = k.grad_x1_contract(Z, Z, K, U);
  const double h = 1e-6;
  for (Index i = 0; i < 4; ++i) {
    for (Index d = 0; d < 2; ++d) {
      Matrix Zp = Z, Zm = Z;
      Zp(i, d) += h;
      Zm(i, d) -= h;
      const double fd = (W.cwiseProduct(k.gram(Zp)).sum() -
                         W.cwiseProduct(k.gram(Zm)).sum()) / (2 * h);
      CHECK(G(i, d) == doctest::Approx(fd).epsilon(5e-5));
    }
  }
}
