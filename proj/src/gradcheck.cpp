#include "svgp/train/gradcheck.hpp"

#include <cmath>

namespace svgp::train {

namespace {

double objective_value(const std::string& objective,
                       const model::ModelState& state, const obj::Batch& batch,
                       const obj::McConfig& mc, Index n_total) {
  auto opts = obj::ObjectiveOptions::none();
  if (objective == "elbo") {
    return obj::elbo_estimate(batch, state, mc, n_total, opts).value;
  }
  return obj::loo_estimate(batch, state, mc, opts).value;
}

}  // namespace

GradCheckReport run_gradcheck(const model::ModelState& state,
                              const obj::Batch& batch, Index n_total,
                              Index mc_samples, std::uint64_t seed,
                              double tol_rel, double tol_abs,
                              const std::string& corrupt_group) {
  GradCheckReport report;
  obj::McConfig mc{mc_samples, math::RandomStream(seed, 0x6C)};

  struct Target {
    std::string objective;
    std::vector<std::string> groups;
  };
  obj::ObjectiveOptions elbo_opts;
  obj::ObjectiveOptions loo_opts;
  loo_opts.grad_lambda = false;
  loo_opts.grad_likelihood = false;
  loo_opts.grad_inducing = true;  // exercise the optional path

  std::vector<Target> targets;
  {
    Target e{"elbo", {model::groups::kTheta, model::groups::kLambda,
                      model::groups::kInducing}};
    if (state.likelihood.num_params() > 0) {
      e.groups.push_back(model::groups::kLikelihood);
    }
    targets.push_back(e);
    targets.push_back(
        {"loo", {model::groups::kTheta, model::groups::kInducing}});
  }

  for (const auto& target : targets) {
    model::GradientRecord analytic;
    if (target.objective == "elbo") {
      analytic = obj::elbo_estimate(batch, state, mc, n_total, elbo_opts).gradients;
    } else {
      analytic = obj::loo_estimate(batch, state, mc, loo_opts).gradients;
    }

    for (const auto& group : target.groups) {
      GradCheckGroup res;
      res.objective = target.objective;
      res.group = group;

      Vector grad = analytic.at(group);
      if (group == corrupt_group) grad[0] += 1.0;

      model::ModelState probe = state;
      const Vector p0 = state.get_group(group);
      res.params_checked = p0.size();
      for (Index i = 0; i < p0.size(); ++i) {
        const double h = 1e-5 * std::max(1.0, std::abs(p0[i]));
        Vector pp = p0, pm = p0;
        pp[i] += h;
        pm[i] -= h;
        probe.set_group(group, pp);
        const double vp = objective_value(target.objective, probe, batch, mc, n_total);
        probe.set_group(group, pm);
        const double vm = objective_value(target.objective, probe, batch, mc, n_total);
        probe.set_group(group, p0);
        const double fd = (vp - vm) / (2.0 * h);

        const double scale = std::max({std::abs(fd), std::abs(grad[i]), tol_abs / tol_rel});
        const double rel = std::abs(fd - grad[i]) / scale;
        if (rel > res.worst_rel_err) {
          res.worst_rel_err = rel;
          res.worst_index = i;
        }
      }
      res.pass = res.worst_rel_err <= tol_rel;
      report.pass = report.pass && res.pass;
      report.groups.push_back(res);
    }
  }
  return report;
}

}  // namespace svgp::train
