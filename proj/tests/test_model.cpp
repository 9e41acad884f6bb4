#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "svgp/model/kl.hpp"
#include "svgp/model/marginals.hpp"
#include "support/oracles.hpp"

using namespace svgp;
using namespace svgp::model;
using svgp::math::RandomStream;
using svgp::math::draw_standard_normals;

namespace {

Matrix random_inputs(RandomStream& rng, Index n, Index d) {
  Matrix x(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) x(i, j) = rng.next_normal();
  return x;
}

ModelState toy_state(Index q, Index m, Index d, Index k, std::uint64_t seed,
                     bool randomize = true) {
  RandomStream rng(seed, 101);
  std::vector<kernels::Kernel> kerns;
  for (Index j = 0; j < q; ++j) {
    kerns.push_back(kernels::Kernel::rbf_ard(d, 0.1 * (j + 1), -0.2));
  }
  InducingSet ind;
  ind.shared = true;
  ind.z = {random_inputs(rng, m, d)};
  lik::Likelihood l = q == 1 ? lik::Likelihood::logistic()
                             : lik::Likelihood::softmax(q);
  auto st = ModelState::init(std::move(kerns), std::move(ind), k, std::move(l));
  if (randomize) {
    for (Index comp = 0; comp < k; ++comp) {
      for (Index j = 0; j < q; ++j) {
        st.posterior.means[comp][j] = draw_standard_normals(rng, m);
        Matrix a = random_inputs(rng, m, m) * 0.3;
        Matrix f = Matrix::Identity(m, m) + a.triangularView<Eigen::StrictlyLower>().toDenseMatrix();
        f.diagonal() = (0.3 * draw_standard_normals(rng, m)).array().exp();
        st.posterior.factors[comp][j] = f;
      }
    }
    st.posterior.logits = draw_standard_normals(rng, k) * 0.5;
  }
  return st;
}

}  // namespace

TEST_CASE("marginal means vanish when posterior means are zero") {
  auto st = toy_state(2, 4, 3, 2, 7, true);
  for (Index c = 0; c < st.k(); ++c)
    for (Index j = 0; j < st.q(); ++j) st.posterior.means[c][j].setZero();
  RandomStream rng(8, 0);
  Matrix xb = random_inputs(rng, 5, 3);
  auto marg = conditional_marginals(xb, st);
  for (Index c = 0; c < st.k(); ++c) {
    CHECK(marg.means[c].cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("at the inducing points with S = K_zz the variance is kappa(z,z)") {
  auto st = toy_state(1, 5, 2, 1, 9, false);
  st.jitter_scale = 1e-12;
  const Matrix& z = st.inducing.z[0];
  Matrix k_zz = st.kernels[0].gram(z);
  auto l = math::cholesky(k_zz);
  st.posterior.factors[0][0] = l.m;
  auto marg = conditional_marginals(z, st);
  for (Index n = 0; n < z.rows(); ++n) {
    CHECK(marg.vars[0](n, 0) ==
          doctest::Approx(st.kernels[0].eval(z.row(n), z.row(n))).epsilon(1e-6));
  }
}

TEST_CASE("marginals match a dense-inverse oracle") {
  auto st = toy_state(2, 3, 2, 2, 11, true);
  st.jitter_scale = 1e-12;
  RandomStream rng(12, 0);
  Matrix xb = random_inputs(rng, 5, 2);
  auto marg = conditional_marginals(xb, st);

  for (Index j = 0; j < st.q(); ++j) {
    const Matrix& z = st.inducing.for_latent(j);
    Matrix k_zz = st.kernels[j].gram(z);
    k_zz.diagonal().array() += marg.cache[j].jitter;
    Matrix k_xz = st.kernels[j].gram(xb, z);
    Matrix a = k_xz * k_zz.inverse();  // N x M
    for (Index c = 0; c < st.k(); ++c) {
      Matrix s = st.posterior.factors[c][j] * st.posterior.factors[c][j].transpose();
      Vector mean = a * st.posterior.means[c][j];
      for (Index n = 0; n < xb.rows(); ++n) {
        const double ktilde = st.kernels[j].eval(xb.row(n), xb.row(n)) -
                              a.row(n).dot(k_xz.row(n));
        const double var = ktilde + a.row(n) * s * a.row(n).transpose();
        CHECK(marg.means[c](n, j) == doctest::Approx(mean[n]).epsilon(1e-8));
        CHECK(marg.vars[c](n, j) == doctest::Approx(var).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("marginals are equivariant under batch permutation") {
  auto st = toy_state(2, 4, 3, 1, 13, true);
  RandomStream rng(14, 0);
  Matrix xb = random_inputs(rng, 6, 3);
  auto marg = conditional_marginals(xb, st);
  std::vector<Index> perm{3, 0, 5, 1, 4, 2};
  Matrix xp(6, 3);
  for (Index i = 0; i < 6; ++i) xp.row(i) = xb.row(perm[i]);
  auto marg_p = conditional_marginals(xp, st);
  for (Index i = 0; i < 6; ++i) {
    CHECK((marg_p.means[0].row(i) - marg.means[0].row(perm[i])).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK((marg_p.vars[0].row(i) - marg.vars[0].row(perm[i])).cwiseAbs().maxCoeff() <
          1e-12);
  }
}

TEST_CASE("marginal variances stay positive") {
  auto st = toy_state(1, 6, 2, 1, 15, true);
  RandomStream rng(16, 0);
  for (int t = 0; t < 5; ++t) {
    Matrix xb = random_inputs(rng, 20, 2);
    auto marg = conditional_marginals(xb, st);
    CHECK((marg.vars[0].array() > 0.0).all());
  }
}

TEST_CASE("kl bound: zero for the prior-matching posterior") {
  auto st = toy_state(1, 4, 2, 1, 17, false);
  st.jitter_scale = 1e-12;
  Matrix k_zz = st.kernels[0].gram(st.inducing.z[0]);
  st.posterior.factors[0][0] = math::cholesky(k_zz).m;
  CHECK(kl_bound(st) == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("kl bound: K=1 equals the closed-form gaussian KL") {
  RandomStream rng(18, 0);
  for (int t = 0; t < 20; ++t) {
    const Index m = 2 + static_cast<Index>(rng.next_u64() % 5);
    const Index q = 1 + static_cast<Index>(rng.next_u64() % 3);
    auto st = toy_state(q, m, 2, 1, 19 + t, true);
    st.jitter_scale = 1e-12;

    double expected = 0.0;
    for (Index j = 0; j < q; ++j) {
      Matrix k_zz = st.kernels[j].gram(st.inducing.for_latent(j));
      Matrix kinv = k_zz.inverse();
      const Vector& mean = st.posterior.means[0][j];
      Matrix s = st.posterior.factors[0][j] * st.posterior.factors[0][j].transpose();
      expected += 0.5 * (mean.dot(kinv * mean) + (kinv * s).trace() - m +
                         std::log(k_zz.determinant() / s.determinant()));
    }
    CHECK(kl_bound(st) == doctest::Approx(expected).epsilon(1e-8));
    CHECK(kl_bound(st) >= -1e-12);
  }
}

TEST_CASE("kl bound: duplicated components collapse to the K=1 value") {
  auto st1 = toy_state(2, 4, 2, 1, 23, true);
  st1.jitter_scale = 1e-12;
  auto st2 = toy_state(2, 4, 2, 2, 23, true);
  st2.jitter_scale = 1e-12;
  st2.posterior.logits = Vector::Zero(2);
  for (Index j = 0; j < 2; ++j) {
    st2.posterior.means[0][j] = st1.posterior.means[0][j];
    st2.posterior.means[1][j] = st1.posterior.means[0][j];
    st2.posterior.factors[0][j] = st1.posterior.factors[0][j];
    st2.posterior.factors[1][j] = st1.posterior.factors[0][j];
  }
  CHECK(kl_bound(st2) == doctest::Approx(kl_bound(st1)).epsilon(1e-10));
}

TEST_CASE("kl bound dominates an MC estimate of the true KL") {
  // K = 2, Q = 1, small M: draw from the mixture and compare
  RandomStream rng(29, 0);
  for (int trial = 0; trial < 3; ++trial) {
    auto st = toy_state(1, 3, 2, 2, 31 + trial, true);
    st.jitter_scale = 1e-12;
    const double bound = kl_bound(st);

    Matrix k_zz = st.kernels[0].gram(st.inducing.z[0]);
    Matrix kinv = k_zz.inverse();
    const double logdet_k = std::log(k_zz.determinant());
    const Vector pi = st.posterior.weights();

    const int s = 100000;
    double acc = 0.0, acc2 = 0.0;
    for (int i = 0; i < s; ++i) {
      const int comp = rng.next_uniform() < pi[0] ? 0 : 1;
      Vector eps = draw_standard_normals(rng, 3);
      Vector u = st.posterior.means[comp][0] + st.posterior.factors[comp][0] * eps;
      double log_q = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < 2; ++c) {
        const Matrix& l = st.posterior.factors[c][0];
        Vector delta = u - st.posterior.means[c][0];
        Vector w = l.triangularView<Eigen::Lower>().solve(delta);
        const double ld = 2.0 * l.diagonal().array().log().sum();
        const double lp = std::log(pi[c]) - 0.5 * (3 * std::log(2 * M_PI) + ld) -
                          0.5 * w.squaredNorm();
        log_q = std::max(log_q, lp) +
                std::log1p(std::exp(-std::abs(lp - log_q)));
      }
      const double log_p = -0.5 * (3 * std::log(2 * M_PI) + logdet_k) -
                           0.5 * u.dot(kinv * u);
      const double v = log_q - log_p;
      acc += v;
      acc2 += v * v;
    }
    const double mc = acc / s;
    const double se = std::sqrt((acc2 / s - mc * mc) / s);
    CHECK(bound >= mc - 3.0 * se);
  }
}

TEST_CASE("sample_latents: zero variance collapses to the means") {
  auto st = toy_state(1, 4, 2, 1, 37, true);
  RandomStream rng(38, 0);
  Matrix xb = random_inputs(rng, 3, 2);
  auto marg = conditional_marginals(xb, st);
  for (auto& v : marg.vars) v.setConstant(1e-12);  // floored
  auto samples = sample_latents(marg, 50, RandomStream(1, 2));
  for (Index n = 0; n < 3; ++n) {
    for (Index i = 0; i < 50; ++i) {
      CHECK(samples.f[0][n](i, 0) ==
            doctest::Approx(marg.means[0](n, 0)).epsilon(1e-4));
    }
  }
}

TEST_CASE("sample_latents is deterministic in the stream") {
  auto st = toy_state(2, 4, 2, 2, 39, true);
  RandomStream rng(40, 0);
  Matrix xb = random_inputs(rng, 4, 2);
  auto marg = conditional_marginals(xb, st);
  auto s1 = sample_latents(marg, 20, RandomStream(5, 6));
  auto s2 = sample_latents(marg, 20, RandomStream(5, 6));
  for (Index c = 0; c < 2; ++c) {
    for (Index n = 0; n < 4; ++n) {
      CHECK((s1.f[c][n] - s2.f[c][n]).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("sample_latents moments at large S") {
  auto st = toy_state(1, 3, 2, 1, 41, true);
  RandomStream rng(42, 0);
  Matrix xb = random_inputs(rng, 1, 2);
  auto marg = conditional_marginals(xb, st);
  marg.means[0](0, 0) = 2.0;
  marg.vars[0](0, 0) = 9.0;
  auto samples = sample_latents(marg, 100000, RandomStream(7, 8));
  const auto col = samples.f[0][0].col(0);
  const double mean = col.mean();
  const double var = (col.array() - mean).square().sum() / (col.size() - 1);
  CHECK(std::abs(mean - 2.0) < 0.05);
  CHECK(std::abs(var - 9.0) < 0.3);
}

TEST_CASE("full posterior diagonal agrees with the marginals") {
  auto st = toy_state(2, 4, 2, 2, 43, true);
  st.jitter_scale = 1e-10;
  RandomStream rng(44, 0);
  Matrix x = random_inputs(rng, 6, 2);
  auto fp = full_posterior(x, st);
  auto marg = conditional_marginals(x, st);
  for (Index c = 0; c < 2; ++c) {
    for (Index j = 0; j < 2; ++j) {
      for (Index n = 0; n < 6; ++n) {
        CHECK(fp.covs[c][j](n, n) ==
              doctest::Approx(marg.vars[c](n, j)).epsilon(1e-9));
        CHECK(fp.means[c][j][n] ==
              doctest::Approx(marg.means[c](n, j)).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("full posterior at Z with S = K_zz returns K_zz") {
  auto st = toy_state(1, 5, 2, 1, 45, false);
  st.jitter_scale = 1e-12;
  Matrix k_zz = st.kernels[0].gram(st.inducing.z[0]);
  st.posterior.factors[0][0] = math::cholesky(k_zz).m;
  auto fp = full_posterior(st.inducing.z[0], st);
  CHECK((fp.covs[0][0] - k_zz).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("full posterior matches a dense oracle") {
  auto st = toy_state(1, 2, 2, 1, 47, true);
  st.jitter_scale = 1e-12;
  RandomStream rng(48, 0);
  Matrix x = random_inputs(rng, 4, 2);
  auto fp = full_posterior(x, st);

  const Matrix& z = st.inducing.z[0];
  Matrix k_zz = st.kernels[0].gram(z);
  Matrix k_xz = st.kernels[0].gram(x, z);
  Matrix k_xx = st.kernels[0].gram(x);
  Matrix a = k_xz * k_zz.inverse();
  Matrix s = st.posterior.factors[0][0] * st.posterior.factors[0][0].transpose();
  Matrix cov = k_xx - a * k_xz.transpose() + a * s * a.transpose();
  Vector mean = a * st.posterior.means[0][0];
  CHECK((fp.covs[0][0] - cov).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((fp.means[0][0] - mean).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("full posterior size guard") {
  auto st = toy_state(1, 2, 2, 1, 49, false);
  Matrix x = Matrix::Zero(10001, 2);
  CHECK_THROWS(full_posterior(x, st));
}

TEST_CASE("parameter groups round-trip") {
  auto st = toy_state(2, 4, 3, 2, 51, true);
  for (const auto& group : st.group_names()) {
    Vector v = st.get_group(group);
    auto st2 = st;
    st2.set_group(group, v);
    CHECK((st2.get_group(group) - v).cwiseAbs().maxCoeff() == 0.0);
  }
  // round-trip through all groups preserves behavior
  RandomStream rng(52, 0);
  Matrix xb = random_inputs(rng, 3, 3);
  auto m1 = conditional_marginals(xb, st);
  auto st3 = st;
  for (const auto& group : st.group_names()) {
    st3.set_group(group, st.get_group(group));
  }
  auto m2 = conditional_marginals(xb, st3);
  CHECK((m1.means[0] - m2.means[0]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((m1.vars[0] - m2.vars[0]).cwiseAbs().maxCoeff() == 0.0);
}
