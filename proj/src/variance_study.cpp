#include "svgp/train/variance_study.hpp"

#include <cmath>
#include <sstream>

namespace svgp::train {

namespace {

// least-squares slope of y over x
double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

VarianceStudyResult run_variance_study(const model::ModelState& state,
                                       const obj::Batch& batch, Index n_total,
                                       const std::vector<Index>& sample_counts,
                                       Index redraws, std::uint64_t seed,
                                       int workers) {
  VarianceStudyResult out;
  out.redraws = redraws;

  // sampled coordinates: the lambda vector without the leading logits
  const Index k = state.k();
  const Index n_coords = state.group_size(model::groups::kLambda) - k;

  obj::ObjectiveOptions opts;
  opts.workers = workers;
  math::RandomStream base(seed, 0x57D1);

  std::vector<double> log_s, log_vr, log_vs;
  double min_ratio = std::numeric_limits<double>::infinity();
  long within = 0, total = 0;

  for (size_t si = 0; si < sample_counts.size(); ++si) {
    const Index s = sample_counts[si];
    Vector mean_r = Vector::Zero(n_coords), m2_r = Vector::Zero(n_coords);
    Vector mean_s = Vector::Zero(n_coords), m2_s = Vector::Zero(n_coords);

    for (Index r = 0; r < redraws; ++r) {
      obj::McConfig mc{s, base.fork(si).fork(static_cast<uint64_t>(r))};
      const Vector gr = obj::reparam_likelihood_gradient(batch, state, mc,
                                                         n_total, opts)
                            .gradients.at(model::groups::kLambda)
                            .tail(n_coords);
      const Vector gs = obj::score_function_gradient(batch, state, mc, n_total,
                                                     opts)
                            .gradients.at(model::groups::kLambda)
                            .tail(n_coords);
      // Welford updates
      const double c = 1.0 / (r + 1);
      Vector dr = gr - mean_r;
      mean_r += c * dr;
      m2_r += dr.cwiseProduct(gr - mean_r);
      Vector ds = gs - mean_s;
      mean_s += c * ds;
      m2_s += ds.cwiseProduct(gs - mean_s);
    }

    VarianceStudyCell cell;
    cell.s = s;
    cell.mean_reparam = mean_r;
    cell.var_reparam = m2_r / (redraws - 1);
    cell.mean_score = mean_s;
    cell.var_score = m2_s / (redraws - 1);
    out.cells.push_back(cell);

    for (Index i = 0; i < n_coords; ++i) {
      const double ratio = cell.var_score[i] /
                           std::max(cell.var_reparam[i], 1e-300);
      min_ratio = std::min(min_ratio, ratio);
      const double se = std::sqrt(cell.var_reparam[i] / redraws +
                                  cell.var_score[i] / redraws);
      if (std::abs(cell.mean_reparam[i] - cell.mean_score[i]) <= 3.0 * se) {
        ++within;
      }
      ++total;
    }
    log_s.push_back(std::log(static_cast<double>(s)));
    log_vr.push_back(std::log(std::max(cell.var_reparam.mean(), 1e-300)));
    log_vs.push_back(std::log(std::max(cell.var_score.mean(), 1e-300)));
  }

  out.slope_reparam = slope(log_s, log_vr);
  out.slope_score = slope(log_s, log_vs);
  out.min_ratio = min_ratio;
  out.frac_means_within_3se = total ? static_cast<double>(within) / total : 0.0;
  return out;
}

std::string VarianceStudyResult::table() const {
  std::ostringstream o;
  o.precision(10);
  o << "# per-coordinate gradient variance over " << redraws << " redraws\n";
  o << "# coordinates: posterior means and covariance factors\n";
  o << "s\testimator\tcoord\tmean\tvariance\n";
  for (const auto& cell : cells) {
    for (Index i = 0; i < cell.var_reparam.size(); ++i) {
      o << cell.s << "\treparam\t" << i << '\t' << cell.mean_reparam[i] << '\t'
        << cell.var_reparam[i] << '\n';
    }
    for (Index i = 0; i < cell.var_score.size(); ++i) {
      o << cell.s << "\tscore\t" << i << '\t' << cell.mean_score[i] << '\t'
        << cell.var_score[i] << '\n';
    }
  }
  o << "# slope_reparam\t" << slope_reparam << "\n";
  o << "# slope_score\t" << slope_score << "\n";
  o << "# min_ratio_score_over_reparam\t" << min_ratio << "\n";
  o << "# frac_means_within_3se\t" << frac_means_within_3se << "\n";
  return o.str();
}

}  // namespace svgp::train
