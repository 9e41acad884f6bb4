#include "svgp/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "svgp/model/marginals.hpp"

namespace svgp::train {

namespace {

// stream roles derived from the run seed
constexpr std::uint64_t kShuffleRole = 1;
constexpr std::uint64_t kObjectiveRole = 2;
constexpr std::uint64_t kEvalRole = 3;

obj::Batch make_batch(const data::Dataset& d, const std::vector<Index>& idx) {
  obj::Batch b;
  b.x.resize(static_cast<Index>(idx.size()), d.d());
  b.y.reserve(idx.size());
  b.indices = idx;
  for (size_t i = 0; i < idx.size(); ++i) {
    b.x.row(static_cast<Index>(i)) = d.x.row(idx[i]);
    b.y.push_back(d.observation(idx[i]));
  }
  return b;
}

}  // namespace

TrainMode mode_from_string(const std::string& s) {
  if (s == "elbo_only") return TrainMode::ElboOnly;
  if (s == "alternating") return TrainMode::Alternating;
  throw std::invalid_argument("unknown training mode: " + s);
}

std::string mode_to_string(TrainMode m) {
  return m == TrainMode::ElboOnly ? "elbo_only" : "alternating";
}

std::string Metrics::header() {
  return "epoch\twall_time_s\tobjective\terror_rate\tmean_nlp\tmsse";
}

std::string Metrics::line() const {
  std::ostringstream out;
  out.precision(17);
  out << epoch << '\t' << wall_time_s << '\t' << objective << '\t' << error_rate
      << '\t' << mean_nlp << '\t' << msse;
  return out.str();
}

double median_sq_distance(const Matrix& x, math::RandomStream stream) {
  const Index n = x.rows();
  const int pairs = 512;
  std::vector<double> d2;
  d2.reserve(pairs);
  for (int t = 0; t < pairs; ++t) {
    const Index i = static_cast<Index>(stream.next_u64() % n);
    const Index j = static_cast<Index>(stream.next_u64() % n);
    if (i == j) continue;
    d2.push_back((x.row(i) - x.row(j)).squaredNorm());
  }
  if (d2.empty()) return 1.0;
  std::nth_element(d2.begin(), d2.begin() + d2.size() / 2, d2.end());
  const double med = d2[d2.size() / 2];
  return med > 0.0 ? med : 1.0;
}

Metrics evaluate(const model::ModelState& state, const data::Dataset& test,
                 const obj::McConfig& mc, int workers) {
  const Index n = test.n();
  if (n < 1) throw std::invalid_argument("evaluate: empty test set");
  if (test.d() != state.d()) {
    throw DimensionMismatch("evaluate: input dimension " + std::to_string(test.d()) +
                            " does not match the model's " + std::to_string(state.d()));
  }
  const bool classification = state.likelihood.is_classification();
  if (classification && test.task == data::Task::Regression) {
    throw DimensionMismatch("evaluate: classification model on regression data");
  }
  if (!classification && test.task != data::Task::Regression) {
    throw DimensionMismatch("evaluate: regression model on classification data");
  }
  if (classification && state.likelihood.num_classes() < test.num_classes) {
    throw DimensionMismatch("evaluate: model covers " +
                            std::to_string(state.likelihood.num_classes()) +
                            " classes but data has " +
                            std::to_string(test.num_classes));
  }

  const Index p = test.task == data::Task::Regression ? test.y_real.cols() : 0;
  Metrics out;
  long errors = 0;
  double nlp_acc = 0.0;
  Vector sq_err = Vector::Zero(std::max<Index>(p, 1));
  const Vector pi = state.posterior.weights();

  // target un-standardization for original-unit metrics
  const bool unstd = test.transform.has_targets && p > 0;

  const Index chunk = 512;
  for (Index begin = 0; begin < n; begin += chunk) {
    const Index end = std::min(n, begin + chunk);
    Matrix xb = test.x.middleRows(begin, end - begin);
    auto marg = model::conditional_marginals(xb, state, workers);
    for (Index i = 0; i < end - begin; ++i) {
      const Index row = begin + i;
      // mixture draws: component by weight, then the diagonal Gaussian
      auto stream_n = mc.stream.fork(static_cast<uint64_t>(row));
      auto comp_stream = stream_n.fork(0x10000);
      auto eps_stream = stream_n.fork(0x10001);
      Matrix f(mc.num_samples, state.q());
      Vector cum = pi;
      for (Index c = 1; c < state.k(); ++c) cum[c] += cum[c - 1];
      for (Index s = 0; s < mc.num_samples; ++s) {
        const double u = comp_stream.next_uniform();
        int comp = 0;
        while (comp < state.k() - 1 && u > cum[comp]) ++comp;
        for (Index j = 0; j < state.q(); ++j) {
          f(s, j) = marg.means[comp](i, j) +
                    std::sqrt(marg.vars[comp](i, j)) * eps_stream.next_normal();
        }
      }
      auto summary = state.likelihood.predict(f);
      lik::Observation y = test.observation(row);

      if (classification) {
        if (summary.label != test.y_label[row]) ++errors;
        nlp_acc -= state.likelihood.log_predictive(y, summary);
      } else {
        Vector mean = summary.mean, var = summary.variance, yv = y.reals;
        if (unstd) {
          const auto& t = test.transform;
          mean = (mean.array() * t.target_scales.array() + t.target_means.array());
          var = var.array() * t.target_scales.array().square();
          yv = (yv.array() * t.target_scales.array() + t.target_means.array());
        }
        for (Index j = 0; j < p; ++j) {
          const double r = yv[j] - mean[j];
          sq_err[j] += r * r;
          nlp_acc += 0.5 * (std::log(2.0 * M_PI * var[j]) + r * r / var[j]);
        }
      }
    }
  }

  out.mean_nlp = nlp_acc / n;
  if (classification) {
    out.error_rate = static_cast<double>(errors) / n;
  } else {
    // MSSE: per-output MSE over the test-target variance (1/(N-1))
    double acc = 0.0;
    for (Index j = 0; j < p; ++j) {
      Vector col = test.y_real.col(j);
      if (unstd) {
        col = (col.array() * test.transform.target_scales[j] +
               test.transform.target_means[j]);
      }
      const double mean = col.mean();
      const double var = n > 1 ? (col.array() - mean).square().sum() / (n - 1) : 1.0;
      acc += (sq_err[j] / n) / (var > 0.0 ? var : 1.0);
    }
    out.msse = acc / p;
  }
  return out;
}

TrainResult train(const data::Dataset& train_data,
                  const data::Dataset* test_data, model::ModelState state,
                  const TrainSchedule& schedule, const TrainHooks& hooks,
                  RmsPropState optimizer, TrainProgress progress) {
  state.validate();
  if (train_data.d() != state.d()) {
    throw DimensionMismatch("train: data dimension mismatch");
  }
  const Index n = train_data.n();
  const Index batch_size = std::min<Index>(schedule.batch_size, n);
  optimizer.learning_rate = schedule.learning_rate;

  TrainResult res;
  res.optimizer = std::move(optimizer);
  res.progress = progress;

  math::RandomStream base(schedule.seed);
  data::BatchIterator iter(n, batch_size, base.fork(kShuffleRole));

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  const int phases_per_round = schedule.mode == TrainMode::Alternating ? 2 : 1;
  double objective_acc = 0.0;
  long objective_steps = 0;
  double prev_phase_mean = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;

  obj::ObjectiveOptions elbo_opts;
  elbo_opts.workers = schedule.workers;
  obj::ObjectiveOptions loo_opts;
  loo_opts.grad_lambda = false;
  loo_opts.grad_likelihood = false;
  loo_opts.grad_inducing = schedule.loo_update_inducing;
  loo_opts.workers = schedule.workers;

  auto emit_metrics = [&](long epoch, double mean_obj) {
    Metrics m;
    if (test_data) {
      obj::McConfig eval_mc{schedule.mc_samples,
                            base.fork(kEvalRole).fork(static_cast<uint64_t>(epoch))};
      m = evaluate(state, *test_data, eval_mc, schedule.workers);
    }
    m.epoch = epoch;
    m.objective = mean_obj;
    m.wall_time_s = elapsed();
    res.history.push_back(m);
    if (hooks.on_metrics) hooks.on_metrics(m);
  };

  try {
    while (res.progress.outer_round < schedule.max_outer_rounds) {
      while (res.progress.phase_index < phases_per_round) {
        const bool loo_phase = res.progress.phase_index == 1;
        double phase_obj_acc = 0.0;
        long phase_steps = 0;

        while (res.progress.epoch_in_phase < schedule.epochs_per_phase) {
          iter.start_epoch(res.progress.next_epoch);
          std::vector<Index> idx;
          while (!(idx = iter.next()).empty()) {
            obj::Batch batch = make_batch(train_data, idx);
            obj::McConfig mc{
                schedule.mc_samples,
                base.fork(kObjectiveRole)
                    .fork(static_cast<uint64_t>(res.progress.global_step))};
            obj::ObjectiveEstimate est;
            if (loo_phase) {
              est = obj::loo_estimate(batch, state, mc, loo_opts);
              res.loo_clamp_events += est.clamp_events;
            } else {
              est = obj::elbo_estimate(batch, state, mc, n, elbo_opts);
            }
            rmsprop_step(state, est.gradients, res.optimizer);
            ++res.progress.global_step;
            objective_acc += est.value;
            ++objective_steps;
            phase_obj_acc += est.value;
            ++phase_steps;
          }
          ++res.progress.next_epoch;
          ++res.progress.epoch_in_phase;

          if (test_data && schedule.eval_every > 0 &&
              res.progress.next_epoch % schedule.eval_every == 0) {
            emit_metrics(res.progress.next_epoch,
                         objective_steps ? objective_acc / objective_steps : 0.0);
            objective_acc = 0.0;
            objective_steps = 0;
          }
        }

        const double phase_mean =
            phase_steps ? phase_obj_acc / phase_steps : 0.0;
        res.phases.push_back({res.progress.outer_round, loo_phase ? 'L' : 'E',
                              phase_mean});

        // counters now name the next unit of work, so a checkpoint taken
        // here resumes cleanly
        ++res.progress.phase_index;
        res.progress.epoch_in_phase = 0;
        if (hooks.on_phase_end) {
          res.state = state;
          hooks.on_phase_end(res);
        }

        // convergence watches the ELBO-phase means across rounds
        if (!loo_phase) {
          if (std::isfinite(prev_phase_mean)) {
            const double rel = std::abs(phase_mean - prev_phase_mean) /
                               std::max(1.0, std::abs(prev_phase_mean));
            if (rel < schedule.convergence_tol) converged = true;
          }
          prev_phase_mean = phase_mean;
        }
      }
      res.progress.phase_index = 0;
      ++res.progress.outer_round;
      if (converged) break;
    }
  } catch (const std::exception& e) {
    res.aborted = true;
    res.abort_reason = e.what();
    res.state = std::move(state);
    if (hooks.on_phase_end) hooks.on_phase_end(res);
    return res;
  }

  if (test_data &&
      (res.history.empty() || res.history.back().epoch != res.progress.next_epoch)) {
    emit_metrics(res.progress.next_epoch,
                 objective_steps ? objective_acc / objective_steps : 0.0);
  }
  res.state = std::move(state);
  return res;
}

}  // namespace svgp::train
