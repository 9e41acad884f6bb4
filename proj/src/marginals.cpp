#include "svgp/model/marginals.hpp"

#include <cmath>

#include "svgp/parallel.hpp"

namespace svgp::model {

namespace {
constexpr double kVarFloor = 1e-12;
}

MarginalBatch conditional_marginals(const Matrix& x_batch,
                                    const ModelState& state, int workers) {
  const Index b = x_batch.rows();
  if (b < 1) throw DimensionMismatch("conditional_marginals: empty batch");
  if (x_batch.cols() != state.d()) {
    throw DimensionMismatch("conditional_marginals: input dimension mismatch");
  }
  const Index q = state.q();
  const Index k = state.k();

  MarginalBatch out;
  out.cache.resize(q);
  out.means.assign(k, Matrix(b, q));
  out.vars.assign(k, Matrix(b, q));

  parallel_chunks(static_cast<size_t>(q), 1, workers,
                  [&](size_t, size_t jb, size_t je) {
    for (size_t js = jb; js < je; ++js) {
      const Index j = static_cast<Index>(js);
      const auto& kern = state.kernels[j];
      const Matrix& z = state.inducing.for_latent(j);
      LatentCache& c = out.cache[j];

      c.k_zz = kern.gram(z);
      const double base =
          state.jitter_scale * std::max(c.k_zz.diagonal().cwiseAbs().mean(), 1e-10);
      auto [l, jit] = math::jittered_cholesky(c.k_zz, base);
      c.l_zz = std::move(l);
      c.jitter = jit;

      c.k_zx = kern.gram(z, x_batch).eval();
      c.a = math::chol_solve(c.l_zz, c.k_zx);
      c.kxx_diag = kern.gram_diag(x_batch);
      c.ktilde_diag =
          (c.kxx_diag - (c.k_zx.cwiseProduct(c.a)).colwise().sum().transpose())
              .cwiseMax(0.0);

      c.alpha.resize(k);
      c.sa.resize(k);
      c.ksa.resize(k);
      for (Index comp = 0; comp < k; ++comp) {
        const Vector& m = state.posterior.means[comp][j];
        const Matrix& fac = state.posterior.factors[comp][j];
        c.alpha[comp] = math::chol_solve(c.l_zz, m);
        c.sa[comp] =
            fac * (fac.transpose() * c.a).eval();  // S_kj A via the factor
        c.ksa[comp] = math::chol_solve(c.l_zz, c.sa[comp]);

        out.means[comp].col(j) = c.a.transpose() * m;
        out.vars[comp].col(j) =
            (c.ktilde_diag +
             (c.a.cwiseProduct(c.sa[comp])).colwise().sum().transpose())
                .cwiseMax(kVarFloor);
      }
    }
  });
  return out;
}

void sample_point(const MarginalBatch& marg, Index n, Index s,
                  const math::RandomStream& point_stream,
                  std::vector<Matrix>& f_out, std::vector<Matrix>& eps_out) {
  const Index k = marg.k();
  const Index q = marg.q();
  f_out.resize(k);
  eps_out.resize(k);
  for (Index comp = 0; comp < k; ++comp) {
    math::RandomStream rs = point_stream.fork(static_cast<uint64_t>(comp));
    Matrix eps(s, q);
    for (Index i = 0; i < s; ++i) {
      for (Index j = 0; j < q; ++j) eps(i, j) = rs.next_normal();
    }
    const auto mean_row = marg.means[comp].row(n);
    const auto sd_row = marg.vars[comp].row(n).cwiseSqrt();
    Matrix f = eps.array().rowwise() * sd_row.array();
    f.rowwise() += mean_row;
    f_out[comp] = std::move(f);
    eps_out[comp] = std::move(eps);
  }
}

LatentSamples sample_latents(const MarginalBatch& marg, Index s,
                             const math::RandomStream& stream) {
  if (s < 1) throw std::invalid_argument("sample_latents: need s >= 1");
  const Index b = marg.batch_size();
  const Index k = marg.k();
  LatentSamples out;
  out.f.assign(k, std::vector<Matrix>(b));
  out.eps.assign(k, std::vector<Matrix>(b));
  std::vector<Matrix> f_pt, eps_pt;
  for (Index n = 0; n < b; ++n) {
    sample_point(marg, n, s, stream.fork(static_cast<uint64_t>(n)), f_pt, eps_pt);
    for (Index comp = 0; comp < k; ++comp) {
      out.f[comp][n] = std::move(f_pt[comp]);
      out.eps[comp][n] = std::move(eps_pt[comp]);
    }
  }
  return out;
}

FullPosterior full_posterior(const Matrix& x, const ModelState& state) {
  const Index n = x.rows();
  if (n > 10000) {
    throw std::invalid_argument(
        "full_posterior: dense N x N storage guard exceeded (N <= 10000)");
  }
  if (x.cols() != state.d()) {
    throw DimensionMismatch("full_posterior: input dimension mismatch");
  }
  const Index q = state.q();
  const Index k = state.k();

  FullPosterior out;
  out.weights = state.posterior.weights();
  out.means.assign(k, std::vector<Vector>(q));
  out.covs.assign(k, std::vector<Matrix>(q));

  for (Index j = 0; j < q; ++j) {
    const auto& kern = state.kernels[j];
    const Matrix& z = state.inducing.for_latent(j);
    const Matrix k_zz = kern.gram(z);
    const double base =
        state.jitter_scale * std::max(k_zz.diagonal().cwiseAbs().mean(), 1e-10);
    auto [l_zz, jit] = math::jittered_cholesky(k_zz, base);
    (void)jit;
    const Matrix k_zx = kern.gram(z, x);
    const Matrix a = math::chol_solve(l_zz, k_zx);  // M x N
    const Matrix k_xx = kern.gram(x);
    const Matrix ktilde = k_xx - k_zx.transpose() * a;

    for (Index comp = 0; comp < k; ++comp) {
      const Vector& m = state.posterior.means[comp][j];
      const Matrix& fac = state.posterior.factors[comp][j];
      out.means[comp][j] = a.transpose() * m;
      const Matrix la = fac.transpose() * a;  // M x N
      out.covs[comp][j] = ktilde + la.transpose() * la;
    }
  }
  return out;
}

}  // namespace svgp::model
