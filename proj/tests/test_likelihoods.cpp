#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "svgp/likelihoods/likelihood.hpp"
#include "svgp/math/random.hpp"

using namespace svgp;
using namespace svgp::lik;
using svgp::math::RandomStream;
using svgp::math::draw_standard_normals;

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

TEST_CASE("softmax log density spot values") {
  auto l = Likelihood::softmax(10);
  Vector f = Vector::Constant(10, 1.3);
  CHECK(l.log_density(Observation::of(4), f) ==
        doctest::Approx(std::log(0.1)).epsilon(1e-12));
}

TEST_CASE("softmax is shift invariant") {
  auto l = Likelihood::softmax(4);
  RandomStream rng(1, 1);
  for (int t = 0; t < 10; ++t) {
    Vector f = draw_standard_normals(rng, 4);
    const double base = l.log_density(Observation::of(2), f);
    const double c = 13.7 * rng.next_normal();
    CHECK(l.log_density(Observation::of(2), Vector(f.array() + c)) ==
          doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("logistic log density at zero") {
  auto l = Likelihood::logistic();
  Vector f = Vector::Zero(1);
  CHECK(l.log_density(Observation::of(0), f) == doctest::Approx(std::log(0.5)));
  CHECK(l.log_density(Observation::of(1), f) == doctest::Approx(std::log(0.5)));
  // stability at extreme f
  f[0] = 500.0;
  CHECK(std::isfinite(l.log_density(Observation::of(0), f)));
  CHECK(l.log_density(Observation::of(1), f) == doctest::Approx(0.0));
}

TEST_CASE("gaussian log density at the mean") {
  auto l = Likelihood::gaussian(1, 0.0);
  Vector f = Vector::Constant(1, 0.7);
  Vector y = f;
  CHECK(l.log_density(Observation::of(y), f) ==
        doctest::Approx(-0.5 * kLog2Pi).epsilon(1e-12));
}

TEST_CASE("gradient spot values") {
  auto sm = Likelihood::softmax(5);
  RandomStream rng(2, 0);
  Vector f = draw_standard_normals(rng, 5);
  auto g = sm.log_density_grad(Observation::of(3), f);
  CHECK(g.df.sum() == doctest::Approx(0.0).epsilon(1e-12));
  Vector probs = (f.array() - f.maxCoeff()).exp();
  probs /= probs.sum();
  CHECK(g.df[3] == doctest::Approx(1.0 - probs[3]).epsilon(1e-10));

  auto lg = Likelihood::logistic();
  Vector f0 = Vector::Zero(1);
  CHECK(lg.log_density_grad(Observation::of(1), f0).df[0] == doctest::Approx(0.5));
  CHECK(lg.log_density_grad(Observation::of(0), f0).df[0] == doctest::Approx(-0.5));
}

TEST_CASE("log_density_grad matches finite differences for all variants") {
  RandomStream rng(3, 0);
  std::vector<Likelihood> models{
      Likelihood::gaussian(2, -0.7), Likelihood::logistic(),
      Likelihood::softmax(3), Likelihood::gprn(2, 2, -1.1)};
  for (auto& l : models) {
    for (int trial = 0; trial < 20; ++trial) {
      const Index q = l.latent_dim();
      Vector f = draw_standard_normals(rng, q);
      Observation y;
      if (l.kind() == Kind::Gaussian || l.kind() == Kind::Gprn) {
        y = Observation::of(Vector(draw_standard_normals(rng, l.output_dim())));
      } else if (l.kind() == Kind::Logistic) {
        y = Observation::of(static_cast<int>(rng.next_u64() % 2));
      } else {
        y = Observation::of(static_cast<int>(rng.next_u64() % l.num_classes()));
      }
      auto g = l.log_density_grad(y, f);
      const double h = 1e-5;
      for (Index i = 0; i < q; ++i) {
        Vector fp = f, fm = f;
        fp[i] += h;
        fm[i] -= h;
        const double fd = (l.log_density(y, fp) - l.log_density(y, fm)) / (2 * h);
        const double scale = std::max({1e-2, std::abs(fd), std::abs(g.df[i])});
        CHECK(std::abs(fd - g.df[i]) / scale < 1e-6);
      }
      // noise-parameter gradients
      if (l.num_params() > 0) {
        Vector p0 = l.pack_params();
        for (Index i = 0; i < p0.size(); ++i) {
          Likelihood lp = l, lm = l;
          Vector pp = p0, pm = p0;
          pp[i] += h;
          pm[i] -= h;
          lp.unpack_params(pp);
          lm.unpack_params(pm);
          const double fd = (lp.log_density(y, f) - lm.log_density(y, f)) / (2 * h);
          const double scale = std::max({1e-2, std::abs(fd), std::abs(g.dnoise[i])});
          CHECK(std::abs(fd - g.dnoise[i]) / scale < 1e-6);
        }
      }
    }
  }
}

TEST_CASE("gprn with unit weights reduces to gaussian regression") {
  auto gprn = Likelihood::gprn(2, 1, -0.3);
  auto gauss = Likelihood::gaussian(2, -0.3);
  RandomStream rng(4, 0);
  for (int t = 0; t < 10; ++t) {
    Vector v = draw_standard_normals(rng, 1);
    Vector y = draw_standard_normals(rng, 2);
    // latent layout [v, W(0,0), W(1,0)] with W pinned at 1
    Vector f_gprn(3);
    f_gprn << v[0], 1.0, 1.0;
    Vector f_gauss = Vector::Constant(2, v[0]);
    CHECK(gprn.log_density(Observation::of(y), f_gprn) ==
          doctest::Approx(gauss.log_density(Observation::of(y), f_gauss))
              .epsilon(1e-12));
  }
}

TEST_CASE("predict: softmax spike and probability simplex") {
  auto l = Likelihood::softmax(3);
  Matrix f(1, 3);
  f << 50.0, -10.0, 0.0;
  auto s = l.predict(f);
  CHECK(s.label == 0);
  CHECK(s.class_probs[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(s.class_probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((s.class_probs.array() >= 0.0).all());
}

TEST_CASE("predict: logistic symmetry and tie break") {
  auto l = Likelihood::logistic();
  Matrix f(2, 1);
  f << 3.0, -3.0;
  auto s = l.predict(f);
  CHECK(s.class_probs[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s.label == 0);  // exact tie goes to the lowest class index
}

TEST_CASE("predict: gaussian moments") {
  auto l = Likelihood::gaussian(1, std::log(0.25));
  Matrix f = Matrix::Constant(5, 1, 2.0);
  auto s = l.predict(f);
  CHECK(s.mean[0] == doctest::Approx(2.0));
  CHECK(s.variance[0] == doctest::Approx(0.25));
}

TEST_CASE("predict probabilities averaged over samples") {
  auto l = Likelihood::softmax(3);
  RandomStream rng(5, 0);
  Matrix f(200, 3);
  for (Index i = 0; i < f.size(); ++i) f(i / 3, i % 3) = rng.next_normal();
  auto s = l.predict(f);
  CHECK(s.class_probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("latent dimension bookkeeping") {
  CHECK(Likelihood::gaussian(3, 0).latent_dim() == 3);
  CHECK(Likelihood::logistic().latent_dim() == 1);
  CHECK(Likelihood::softmax(7).latent_dim() == 7);
  CHECK(Likelihood::gprn(2, 3, 0).latent_dim() == 3 + 6);

  auto l = Likelihood::softmax(3);
  Vector bad(2);
  CHECK_THROWS_AS(l.log_density(Observation::of(0), bad), DimensionMismatch);
  Vector nan_f = Vector::Constant(3, std::nan(""));
  CHECK_THROWS_AS(l.log_density(Observation::of(0), nan_f), NumericalError);
}
