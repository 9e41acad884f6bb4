#include "svgp/objectives/objectives.hpp"

#include <atomic>
#include <cmath>

#include "svgp/math/linalg.hpp"
#include "svgp/parallel.hpp"

namespace svgp::obj {

using model::LatentCache;
using model::MarginalBatch;
using model::ModelState;

namespace {

constexpr double kVarFloor = 1e-12;
constexpr double kLooClamp = 700.0;

void check_batch(const Batch& batch, const ModelState& state) {
  if (batch.size() < 1) throw DimensionMismatch("objective: empty batch");
  if (static_cast<Index>(batch.y.size()) != batch.size() ||
      static_cast<Index>(batch.indices.size()) != batch.size()) {
    throw DimensionMismatch("objective: batch fields disagree on size");
  }
  if (!batch.x.allFinite()) throw NumericalError("objective: non-finite inputs");
  (void)state;
}

/// Per-component coefficient matrices (B x Q): G scales the mean path,
/// H the variance path. Both already carry the per-point weights, so the
/// downstream assembly is objective-agnostic.
struct Coefficients {
  std::vector<Matrix> g;  // [K] B x Q
  std::vector<Matrix> h;  // [K] B x Q
};

/// Mean/factor (lambda) gradients from the coefficients.
void add_lambda_grads(const ModelState& state, const MarginalBatch& marg,
                      const Coefficients& co,
                      std::vector<std::vector<Vector>>& d_means,
                      std::vector<std::vector<Matrix>>& d_factors) {
  const Index k = state.k();
  const Index q = state.q();
  for (Index comp = 0; comp < k; ++comp) {
    for (Index j = 0; j < q; ++j) {
      const auto& c = marg.cache[j];
      d_means[comp][j] += c.a * co.g[comp].col(j);
      const Matrix aw = c.a * co.h[comp].col(j).asDiagonal() * c.a.transpose();
      const Matrix dl = 2.0 * aw * state.posterior.factors[comp][j];
      d_factors[comp][j] += dl.triangularView<Eigen::Lower>().toDenseMatrix();
    }
  }
}

/// Kernel hyperparameter and inducing-input gradients from the
/// coefficients plus an optional extra K_zz trace weight (the KL part).
void add_kernel_grads(const ModelState& state, const MarginalBatch& marg,
                      const Batch& batch, const Coefficients& co,
                      const std::vector<Matrix>* extra_kzz_weight,
                      bool want_theta, bool want_inducing, int workers,
                      Vector& d_theta, std::vector<Matrix>& d_inducing) {
  const Index k = state.k();
  const Index q = state.q();
  const Index b = batch.size();

  std::vector<Index> theta_offsets(q, 0);
  {
    Index at = 0;
    for (Index j = 0; j < q; ++j) {
      theta_offsets[j] = at;
      at += state.kernels[j].num_params();
    }
  }
  std::vector<Matrix> z_slots;
  if (want_inducing) {
    z_slots.assign(q, Matrix::Zero(state.m(), state.d()));
  }

  parallel_chunks(static_cast<size_t>(q), 1, workers,
                  [&](size_t, size_t jb, size_t je) {
    for (size_t js = jb; js < je; ++js) {
      const Index j = static_cast<Index>(js);
      const auto& c = marg.cache[j];
      const auto& kern = state.kernels[j];
      const Matrix& z = state.inducing.for_latent(j);
      const Index m = state.m();

      Matrix u = Matrix::Zero(m, b);
      Vector v = Vector::Zero(b);
      Matrix gamma = Matrix::Zero(m, m);
      for (Index comp = 0; comp < k; ++comp) {
        const Vector gt = co.g[comp].col(j);
        const Vector ht = co.h[comp].col(j);
        u.noalias() += c.alpha[comp] * gt.transpose();
        u.noalias() -= 2.0 * ((c.a - c.ksa[comp]) * ht.asDiagonal());
        v += ht;
        gamma.noalias() -= c.alpha[comp] * (c.a * gt).transpose();
        const Matrix aht = c.a * ht.asDiagonal();
        gamma.noalias() += aht * c.a.transpose();
        gamma.noalias() -= 2.0 * (c.ksa[comp] * ht.asDiagonal()) * c.a.transpose();
      }
      if (extra_kzz_weight) gamma += (*extra_kzz_weight)[j];

      if (want_theta) {
        Vector tj = kern.gram_grad_contract(z, batch.x, c.k_zx, u);
        tj += kern.gram_grad_contract(z, z, c.k_zz, gamma);
        tj += kern.diag_grad_contract(batch.x, c.kxx_diag, v);
        d_theta.segment(theta_offsets[j], kern.num_params()) = tj;
      }
      if (want_inducing) {
        Matrix gz = kern.grad_x1_contract(z, batch.x, c.k_zx, u);
        gz += kern.grad_x1_contract(z, z, c.k_zz,
                                    Matrix(gamma + gamma.transpose()));
        z_slots[j] = std::move(gz);
      }
    }
  });

  if (want_inducing) {
    if (state.inducing.shared) {
      d_inducing.assign(1, Matrix::Zero(state.m(), state.d()));
      for (Index j = 0; j < q; ++j) d_inducing[0] += z_slots[j];
    } else {
      d_inducing = std::move(z_slots);
    }
  }
}

/// Packs lambda-space gradients (raw factors) into the flat unconstrained
/// layout used by ModelState::get_group, applying the log-diagonal chain.
Vector pack_lambda(const ModelState& state, const Vector& d_logits,
                   const std::vector<std::vector<Vector>>& d_means,
                   const std::vector<std::vector<Matrix>>& d_factors) {
  const Index k = state.k();
  const Index q = state.q();
  const Index m = state.m();
  Vector out(state.group_size(model::groups::kLambda));
  Index at = 0;
  out.segment(at, k) = d_logits;
  at += k;
  for (Index comp = 0; comp < k; ++comp) {
    for (Index j = 0; j < q; ++j) {
      out.segment(at, m) = d_means[comp][j];
      at += m;
    }
  }
  for (Index comp = 0; comp < k; ++comp) {
    for (Index j = 0; j < q; ++j) {
      const Matrix& dl = d_factors[comp][j];
      const Matrix& l = state.posterior.factors[comp][j];
      for (Index r = 0; r < m; ++r) {
        for (Index col = 0; col < r; ++col) out[at++] = dl(r, col);
        out[at++] = dl(r, r) * l(r, r);  // log-diagonal chain
      }
    }
  }
  return out;
}

Vector softmax_chain(const Vector& pi, const Vector& d_pi) {
  const double avg = pi.dot(d_pi);
  return pi.array() * (d_pi.array() - avg);
}

enum class LikGradMode { Reparam, Score };

/// Shared engine for elbo_estimate, score_function_gradient and
/// reparam_likelihood_gradient: estimates the expected-likelihood term and
/// fills coefficient matrices for whichever gradient paths are requested.
struct LikTermResult {
  double value = 0.0;          // scaled sum over the batch
  double var_acc = 0.0;        // variance estimate of the scaled sum
  Vector per_point;            // unscaled per-point values
  Matrix t;                    // B x K per-component sample means
  Coefficients co;             // weighted coefficients for the grad paths
  Vector d_noise;              // likelihood noise gradients (scaled)
};

LikTermResult expected_lik_term(const Batch& batch, const ModelState& state,
                                const MarginalBatch& marg, const McConfig& mc,
                                double scale, bool need_grads,
                                LikGradMode mode, bool want_noise_grads,
                                int workers) {
  const Index b = batch.size();
  const Index k = state.k();
  const Index q = state.q();
  const Index s = mc.num_samples;
  const Vector pi = state.posterior.weights();

  LikTermResult res;
  res.per_point = Vector::Zero(b);
  res.t = Matrix::Zero(b, k);
  if (need_grads) {
    res.co.g.assign(k, Matrix::Zero(b, q));
    res.co.h.assign(k, Matrix::Zero(b, q));
  }

  const size_t chunk = 64;
  const size_t n_chunks = (static_cast<size_t>(b) + chunk - 1) / chunk;
  std::vector<Vector> noise_chunks(
      want_noise_grads ? n_chunks : 0,
      Vector::Zero(state.likelihood.num_params()));
  std::vector<double> var_chunks(n_chunks, 0.0);

  parallel_chunks(static_cast<size_t>(b), chunk, workers,
                  [&](size_t ci, size_t nb, size_t ne) {
    std::vector<Matrix> f_pt, eps_pt;
    Vector logp;
    Matrix grad_f;
    for (size_t ns = nb; ns < ne; ++ns) {
      const Index n = static_cast<Index>(ns);
      const auto stream_n =
          mc.stream.fork(static_cast<uint64_t>(batch.indices[n]));
      model::sample_point(marg, n, s, stream_n, f_pt, eps_pt);
      double point_value = 0.0;
      for (Index comp = 0; comp < k; ++comp) {
        const double weight = scale * pi[comp] / static_cast<double>(s);
        state.likelihood.eval_batch(
            batch.y[n], f_pt[comp], logp, need_grads ? &grad_f : nullptr,
            want_noise_grads ? &noise_chunks[ci] : nullptr,
            need_grads ? weight : 0.0);
        if (!logp.allFinite()) {
          throw NumericalError("objective: non-finite log-density at point " +
                                   std::to_string(batch.indices[n]),
                               batch.indices[n]);
        }
        const double mean_logp = logp.mean();
        res.t(n, comp) = mean_logp;
        point_value += pi[comp] * mean_logp;
        if (s > 1) {
          const double sv =
              (logp.array() - mean_logp).square().sum() / (s - 1);
          var_chunks[ci] += pi[comp] * pi[comp] * sv / s;
        }

        if (need_grads) {
          const auto& eps = eps_pt[comp];
          const auto sd =
              marg.vars[comp].row(n).cwiseSqrt();
          for (Index j = 0; j < q; ++j) {
            const double var = marg.vars[comp](n, j);
            if (var <= kVarFloor) continue;  // floored: no variance path
            if (mode == LikGradMode::Reparam) {
              res.co.g[comp](n, j) = weight * grad_f.col(j).sum();
              res.co.h[comp](n, j) =
                  weight * grad_f.col(j).dot(eps.col(j)) / (2.0 * sd[j]);
            } else {
              // score function: grad log q wrt mean is eps/sd, wrt var is
              // (eps^2 - 1) / (2 var)
              res.co.g[comp](n, j) =
                  weight * logp.dot(eps.col(j)) / sd[j];
              res.co.h[comp](n, j) =
                  weight *
                  logp.dot((eps.col(j).array().square() - 1.0).matrix()) /
                  (2.0 * var);
            }
          }
        }
      }
      res.per_point[n] = point_value;
    }
  });

  res.value = scale * res.per_point.sum();
  for (double vc : var_chunks) res.var_acc += vc;
  res.var_acc *= scale * scale;
  if (want_noise_grads) {
    res.d_noise = Vector::Zero(state.likelihood.num_params());
    for (const auto& nc : noise_chunks) res.d_noise += nc;
  }
  return res;
}

ObjectiveEstimate lik_gradient_impl(const Batch& batch, const ModelState& state,
                                    const McConfig& mc, Index n_total,
                                    const ObjectiveOptions& opts,
                                    LikGradMode mode) {
  check_batch(batch, state);
  const double scale = static_cast<double>(n_total) / batch.size();
  MarginalBatch marg = conditional_marginals(batch.x, state, opts.workers);
  LikTermResult lik = expected_lik_term(batch, state, marg, mc, scale, true,
                                        mode, false, opts.workers);

  const Index k = state.k();
  const Index q = state.q();
  std::vector<std::vector<Vector>> d_means(
      k, std::vector<Vector>(q, Vector::Zero(state.m())));
  std::vector<std::vector<Matrix>> d_factors(
      k, std::vector<Matrix>(q, Matrix::Zero(state.m(), state.m())));
  add_lambda_grads(state, marg, lik.co, d_means, d_factors);

  const Vector pi = state.posterior.weights();
  const Vector d_pi = scale * lik.t.colwise().sum().transpose();
  const Vector d_logits = softmax_chain(pi, d_pi);

  ObjectiveEstimate out;
  out.value = lik.value;
  out.lik_value = lik.value;
  out.lik_std_error = std::sqrt(lik.var_acc);
  out.per_point_values = lik.per_point;
  out.mc_samples_used = mc.num_samples;
  out.batch_indices = batch.indices;
  out.gradients[model::groups::kLambda] =
      pack_lambda(state, d_logits, d_means, d_factors);
  return out;
}

}  // namespace

ObjectiveEstimate elbo_estimate(const Batch& batch, const ModelState& state,
                                const McConfig& mc, Index n_total,
                                const ObjectiveOptions& opts) {
  check_batch(batch, state);
  if (n_total < batch.size()) {
    throw std::invalid_argument("elbo_estimate: n_total < batch size");
  }
  const double scale = static_cast<double>(n_total) / batch.size();
  const bool need_grads = opts.grad_theta || opts.grad_lambda ||
                          opts.grad_inducing || opts.grad_likelihood;

  MarginalBatch marg = conditional_marginals(batch.x, state, opts.workers);
  LikTermResult lik = expected_lik_term(
      batch, state, marg, mc, scale, need_grads, LikGradMode::Reparam,
      opts.grad_likelihood && state.likelihood.num_params() > 0, opts.workers);

  model::KlResult kl = model::kl_bound(
      state, marg.cache, need_grads,
      opts.grad_theta || opts.grad_inducing);

  ObjectiveEstimate out;
  out.kl_value = kl.value;
  out.lik_value = lik.value;
  out.value = lik.value - kl.value;
  out.lik_std_error = std::sqrt(lik.var_acc);
  out.per_point_values = lik.per_point;
  out.mc_samples_used = mc.num_samples;
  out.batch_indices = batch.indices;

  if (!need_grads) return out;

  if (opts.grad_lambda) {
    const Index k = state.k();
    const Index q = state.q();
    std::vector<std::vector<Vector>> d_means = kl.grads.means;
    std::vector<std::vector<Matrix>> d_factors = kl.grads.factors;
    for (Index comp = 0; comp < k; ++comp) {
      for (Index j = 0; j < q; ++j) {
        d_means[comp][j] = -d_means[comp][j];
        d_factors[comp][j] = -d_factors[comp][j];
      }
    }
    add_lambda_grads(state, marg, lik.co, d_means, d_factors);

    const Vector pi = state.posterior.weights();
    const Vector d_pi_lik = scale * lik.t.colwise().sum().transpose();
    const Vector d_logits = softmax_chain(pi, d_pi_lik) - kl.grads.logits;
    out.gradients[model::groups::kLambda] =
        pack_lambda(state, d_logits, d_means, d_factors);
  }

  if (opts.grad_theta || opts.grad_inducing) {
    // ELBO = lik - KL, so the KL trace weight enters negated.
    std::vector<Matrix> kzz_extra(state.q());
    for (Index j = 0; j < state.q(); ++j) kzz_extra[j] = -kl.grads.kzz_weight[j];
    Vector d_theta = Vector::Zero(state.group_size(model::groups::kTheta));
    std::vector<Matrix> d_inducing;
    add_kernel_grads(state, marg, batch, lik.co, &kzz_extra, opts.grad_theta,
                     opts.grad_inducing, opts.workers, d_theta, d_inducing);
    if (opts.grad_theta) out.gradients[model::groups::kTheta] = d_theta;
    if (opts.grad_inducing) {
      Vector flat(state.group_size(model::groups::kInducing));
      Index at = 0;
      for (const auto& g : d_inducing) {
        for (Index r = 0; r < g.rows(); ++r) {
          flat.segment(at, g.cols()) = g.row(r).transpose();
          at += g.cols();
        }
      }
      out.gradients[model::groups::kInducing] = flat;
    }
  }

  if (opts.grad_likelihood && state.likelihood.num_params() > 0) {
    out.gradients[model::groups::kLikelihood] = lik.d_noise;
  }
  return out;
}

ObjectiveEstimate loo_estimate(const Batch& batch, const ModelState& state,
                               const McConfig& mc,
                               const ObjectiveOptions& opts) {
  check_batch(batch, state);
  const Index b = batch.size();
  const Index k = state.k();
  const Index q = state.q();
  const Index s = mc.num_samples;
  const Vector pi = state.posterior.weights();
  const double inv_b = 1.0 / static_cast<double>(b);

  MarginalBatch marg = conditional_marginals(batch.x, state, opts.workers);

  const bool need_grads = opts.grad_theta || opts.grad_inducing;
  Coefficients co;
  if (need_grads) {
    co.g.assign(k, Matrix::Zero(b, q));
    co.h.assign(k, Matrix::Zero(b, q));
  }
  Vector per_point = Vector::Zero(b);
  const size_t chunk = 64;
  const size_t n_chunks = (static_cast<size_t>(b) + chunk - 1) / chunk;
  std::vector<long> clamp_chunks(n_chunks, 0);
  std::vector<double> var_chunks(n_chunks, 0.0);

  // cumulative mixture weights for the component draws
  Vector cum = pi;
  for (Index c = 1; c < k; ++c) cum[c] += cum[c - 1];

  parallel_chunks(static_cast<size_t>(b), chunk, opts.workers,
                  [&](size_t ci, size_t nb, size_t ne) {
    Vector f(q), eps(q), grad(q);
    for (size_t ns = nb; ns < ne; ++ns) {
      const Index n = static_cast<Index>(ns);
      const auto stream_n =
          mc.stream.fork(static_cast<uint64_t>(batch.indices[n]));
      auto comp_stream = stream_n.fork(0x10000);
      auto eps_stream = stream_n.fork(0x10001);

      Vector c_vals(s);
      std::vector<int> comps(s);
      Matrix eps_all(s, q);
      Matrix grads_all;
      if (need_grads) grads_all.resize(s, q);

      for (Index i = 0; i < s; ++i) {
        const double u = comp_stream.next_uniform();
        int comp = 0;
        while (comp < k - 1 && u > cum[comp]) ++comp;
        comps[i] = comp;
        for (Index j = 0; j < q; ++j) {
          eps(j) = eps_stream.next_normal();
          f(j) = marg.means[comp](n, j) +
                 std::sqrt(marg.vars[comp](n, j)) * eps(j);
        }
        eps_all.row(i) = eps.transpose();
        const double logp = state.likelihood.log_density(batch.y[n], f);
        if (!std::isfinite(logp)) {
          throw NumericalError("loo: non-finite log-density at point " +
                                   std::to_string(batch.indices[n]),
                               batch.indices[n]);
        }
        double c_i = -logp;
        if (c_i > kLooClamp) {
          c_i = kLooClamp;
          ++clamp_chunks[ci];
          if (need_grads) grads_all.row(i).setZero();
        } else if (need_grads) {
          grads_all.row(i) =
              state.likelihood.log_density_grad(batch.y[n], f).df.transpose();
        }
        c_vals[i] = c_i;
      }

      const double lse = math::logsumexp(c_vals);
      per_point[n] = -(lse - std::log(static_cast<double>(s)));
      {
        // relative MC variance of mean(exp(c)) via the second moment
        const double lse2 = math::logsumexp(Vector(2.0 * c_vals.array()));
        const double log_m1 = lse - std::log(double(s));
        const double log_m2 = lse2 - std::log(double(s));
        const double rel = std::exp(std::min(700.0, log_m2 - 2.0 * log_m1)) - 1.0;
        var_chunks[ci] += std::max(0.0, rel) / s;
      }

      if (need_grads) {
        // d per_point / d logp_i = softmax(c)_i (zero where clamped)
        Vector omega = (c_vals.array() - lse).exp();
        for (Index i = 0; i < s; ++i) {
          if (c_vals[i] >= kLooClamp) omega[i] = 0.0;
          const int comp = comps[i];
          for (Index j = 0; j < q; ++j) {
            const double var = marg.vars[comp](n, j);
            if (var <= kVarFloor) continue;
            const double gij = omega[i] * grads_all(i, j);
            co.g[comp](n, j) += inv_b * gij;
            co.h[comp](n, j) +=
                inv_b * gij * eps_all(i, j) / (2.0 * std::sqrt(var));
          }
        }
      }
    }
  });

  ObjectiveEstimate out;
  out.value = inv_b * per_point.sum();
  out.lik_value = out.value;
  out.per_point_values = per_point;
  out.mc_samples_used = s;
  out.batch_indices = batch.indices;
  for (auto cc : clamp_chunks) out.clamp_events += cc;
  double var_acc = 0.0;
  for (double vc : var_chunks) var_acc += vc;
  out.lik_std_error = inv_b * std::sqrt(var_acc);

  if (need_grads) {
    Vector d_theta = Vector::Zero(state.group_size(model::groups::kTheta));
    std::vector<Matrix> d_inducing;
    add_kernel_grads(state, marg, batch, co, nullptr, opts.grad_theta,
                     opts.grad_inducing, opts.workers, d_theta, d_inducing);
    if (opts.grad_theta) out.gradients[model::groups::kTheta] = d_theta;
    if (opts.grad_inducing) {
      Vector flat(state.group_size(model::groups::kInducing));
      Index at = 0;
      for (const auto& g : d_inducing) {
        for (Index r = 0; r < g.rows(); ++r) {
          flat.segment(at, g.cols()) = g.row(r).transpose();
          at += g.cols();
        }
      }
      out.gradients[model::groups::kInducing] = flat;
    }
  }
  return out;
}

ObjectiveEstimate score_function_gradient(const Batch& batch,
                                          const ModelState& state,
                                          const McConfig& mc, Index n_total,
                                          const ObjectiveOptions& opts) {
  return lik_gradient_impl(batch, state, mc, n_total, opts,
                           LikGradMode::Score);
}

ObjectiveEstimate reparam_likelihood_gradient(const Batch& batch,
                                              const ModelState& state,
                                              const McConfig& mc, Index n_total,
                                              const ObjectiveOptions& opts) {
  return lik_gradient_impl(batch, state, mc, n_total, opts,
                           LikGradMode::Reparam);
}

}  // namespace svgp::obj
