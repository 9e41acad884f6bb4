#include "svgp/model/kl.hpp"

#include <cmath>

namespace svgp::model {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

struct PairTerm {
  double log_n;          // sum_j log N(m_kj; m_lj, S_kj + S_lj)
  std::vector<Vector> cinv_delta;  // per j: C^{-1} (m_kj - m_lj)
  std::vector<Matrix> cinv;        // per j: C^{-1}
};

}  // namespace

KlResult kl_bound(const ModelState& state, const std::vector<LatentCache>& cache,
                  bool with_grads, bool with_kernel_grads) {
  const Index k = state.k();
  const Index q = state.q();
  const Index m = state.m();
  const Vector pi = state.posterior.weights();

  KlResult out;
  if (with_grads) {
    out.has_grads = true;
    out.grads.logits = Vector::Zero(k);
    out.grads.means.assign(k, std::vector<Vector>(q, Vector::Zero(m)));
    out.grads.factors.assign(k, std::vector<Matrix>(q, Matrix::Zero(m, m)));
    if (with_kernel_grads) {
      out.grads.kzz_weight.assign(q, Matrix::Zero(m, m));
    }
  }
  Vector d_pi = Vector::Zero(k);  // d(bound)/d pi_k before the softmax chain

  // --- exact cross-entropy term: -E_q[log p(u)] -------------------------
  // bracket_k = sum_j [ -1/2 m^T K^-1 m - 1/2 tr(K^-1 S) - 1/2 log|2 pi K| ]
  Vector bracket = Vector::Zero(k);
  std::vector<Matrix> kinv;  // per j, only when kernel grads requested
  if (with_grads && with_kernel_grads) kinv.resize(q);

  for (Index j = 0; j < q; ++j) {
    const auto& c = cache[j];
    const double logdet_k = c.l_zz.log_det_of_product();
    if (with_grads && with_kernel_grads) {
      kinv[j] = math::chol_solve(c.l_zz, Matrix::Identity(m, m));
    }
    for (Index comp = 0; comp < k; ++comp) {
      const Vector& mean = state.posterior.means[comp][j];
      const Matrix& fac = state.posterior.factors[comp][j];
      const Matrix linv_fac = math::tri_solve(c.l_zz, fac);
      const double tr_kinv_s = linv_fac.squaredNorm();
      const double maha = mean.dot(c.alpha[comp]);
      bracket[comp] +=
          -0.5 * maha - 0.5 * tr_kinv_s - 0.5 * (m * kLog2Pi + logdet_k);

      if (with_grads) {
        // d(bound)/dm += pi_k K^-1 m ; d(bound)/dL += pi_k K^-1 L
        out.grads.means[comp][j] += pi[comp] * c.alpha[comp];
        const Matrix kinv_fac = math::tri_solve(c.l_zz, linv_fac, true);
        out.grads.factors[comp][j] +=
            pi[comp] * kinv_fac.triangularView<Eigen::Lower>().toDenseMatrix();
        if (with_kernel_grads) {
          // dE/dK contribution; bound subtracts E, so negate into the weight
          const Matrix kinv_s_kinv = kinv_fac * linv_fac.transpose();
          out.grads.kzz_weight[j] -=
              pi[comp] * 0.5 *
              (c.alpha[comp] * c.alpha[comp].transpose() + kinv_s_kinv -
               kinv[j]);
        }
      }
    }
  }
  const double cross_entropy = -pi.dot(bracket);
  for (Index comp = 0; comp < k; ++comp) d_pi[comp] += -bracket[comp];

  // --- entropy lower bounds ---------------------------------------------
  // conditional: H_c = sum_k pi_k sum_j (M/2 log(2 pi e) + sum log diag L)
  Vector comp_entropy = Vector::Zero(k);
  for (Index comp = 0; comp < k; ++comp) {
    for (Index j = 0; j < q; ++j) {
      comp_entropy[comp] +=
          0.5 * m * (kLog2Pi + 1.0) +
          state.posterior.factors[comp][j].diagonal().array().log().sum();
    }
  }
  const double h_cond = pi.dot(comp_entropy);

  // Jensen: H_j = -sum_k pi_k log sum_l pi_l exp(log N_kl)
  std::vector<std::vector<PairTerm>> pairs(k, std::vector<PairTerm>(k));
  for (Index a = 0; a < k; ++a) {
    for (Index bcomp = 0; bcomp <= a; ++bcomp) {
      PairTerm t;
      t.log_n = 0.0;
      t.cinv_delta.resize(q);
      if (with_grads) t.cinv.resize(q);
      for (Index j = 0; j < q; ++j) {
        const Matrix& fa = state.posterior.factors[a][j];
        const Matrix& fb = state.posterior.factors[bcomp][j];
        Matrix csum = fa * fa.transpose() + fb * fb.transpose();
        auto lc = math::cholesky(0.5 * (csum + csum.transpose()));
        const Vector delta =
            state.posterior.means[a][j] - state.posterior.means[bcomp][j];
        const Vector cinv_delta = math::chol_solve(lc, delta);
        t.log_n += -0.5 * m * kLog2Pi - 0.5 * lc.log_det_of_product() -
                   0.5 * delta.dot(cinv_delta);
        t.cinv_delta[j] = cinv_delta;
        if (with_grads) t.cinv[j] = math::chol_solve(lc, Matrix::Identity(m, m));
      }
      pairs[a][bcomp] = t;
      if (bcomp != a) {
        pairs[bcomp][a].log_n = t.log_n;
        pairs[bcomp][a].cinv_delta.resize(q);
        if (with_grads) pairs[bcomp][a].cinv.resize(q);
        for (Index j = 0; j < q; ++j) {
          pairs[bcomp][a].cinv_delta[j] = -t.cinv_delta[j];
          if (with_grads) pairs[bcomp][a].cinv[j] = t.cinv[j];
        }
      }
    }
  }
  Vector log_t(k);
  for (Index a = 0; a < k; ++a) {
    Vector terms(k);
    for (Index l = 0; l < k; ++l) {
      terms[l] = std::log(std::max(pi[l], 1e-300)) + pairs[a][l].log_n;
    }
    log_t[a] = math::logsumexp(terms);
  }
  const double h_jensen = -pi.dot(log_t);

  const bool use_cond = h_cond >= h_jensen;
  const double entropy_bound = use_cond ? h_cond : h_jensen;
  out.value = cross_entropy - entropy_bound;

  if (!with_grads) return out;

  if (use_cond) {
    for (Index comp = 0; comp < k; ++comp) {
      d_pi[comp] -= comp_entropy[comp];
      for (Index j = 0; j < q; ++j) {
        // -dH_c/dL: diagonal entries only
        out.grads.factors[comp][j].diagonal() -=
            pi[comp] * state.posterior.factors[comp][j].diagonal().cwiseInverse();
      }
    }
  } else {
    // W_al = pi_a pi_l N_al / T_a with T_a = exp(log_t[a])
    Matrix w(k, k);
    for (Index a = 0; a < k; ++a) {
      for (Index l = 0; l < k; ++l) {
        w(a, l) = pi[a] * pi[l] * std::exp(pairs[a][l].log_n - log_t[a]);
      }
    }
    for (Index a = 0; a < k; ++a) {
      // bound subtracts H_j, and H_j = -sum pi log T: d(-H_j)/dpi_a
      double dh_dpi = -log_t[a];
      for (Index kk = 0; kk < k; ++kk) {
        dh_dpi -= pi[kk] * std::exp(pairs[kk][a].log_n - log_t[kk]);
      }
      d_pi[a] -= dh_dpi;
      for (Index j = 0; j < q; ++j) {
        Vector dmean = Vector::Zero(state.m());
        Matrix ds = Matrix::Zero(state.m(), state.m());
        for (Index l = 0; l < k; ++l) {
          const double wl = w(a, l) + w(l, a);
          const Vector& cd = pairs[a][l].cinv_delta[j];
          dmean += wl * cd;
          ds += wl * (-0.5 * pairs[a][l].cinv[j] + 0.5 * (cd * cd.transpose()));
        }
        // dH_j/dm_a = dmean, dH_j/dS_a = -ds; bound adds -H_j
        out.grads.means[a][j] -= dmean;
        const Matrix dl = 2.0 * ds * state.posterior.factors[a][j];
        out.grads.factors[a][j] +=
            dl.triangularView<Eigen::Lower>().toDenseMatrix();
      }
    }
  }

  // softmax chain: d/d logit_c = pi_c (d_pi_c - sum_k pi_k d_pi_k)
  const double avg = pi.dot(d_pi);
  for (Index comp = 0; comp < k; ++comp) {
    out.grads.logits[comp] = pi[comp] * (d_pi[comp] - avg);
  }
  return out;
}

double kl_bound(const ModelState& state) {
  const Index q = state.q();
  std::vector<LatentCache> cache(q);
  for (Index j = 0; j < q; ++j) {
    const auto& kern = state.kernels[j];
    const Matrix& z = state.inducing.for_latent(j);
    cache[j].k_zz = kern.gram(z);
    const double base =
        state.jitter_scale *
        std::max(cache[j].k_zz.diagonal().cwiseAbs().mean(), 1e-10);
    auto [l, jit] = math::jittered_cholesky(cache[j].k_zz, base);
    cache[j].l_zz = std::move(l);
    cache[j].jitter = jit;
    cache[j].alpha.resize(state.k());
    for (Index comp = 0; comp < state.k(); ++comp) {
      cache[j].alpha[comp] =
          math::chol_solve(cache[j].l_zz, state.posterior.means[comp][j]);
    }
  }
  return kl_bound(state, cache, false, false).value;
}

}  // namespace svgp::model
