#pragma once

#include <string>
#include <vector>

#include "svgp/model/state.hpp"
#include "svgp/objectives/objectives.hpp"

namespace svgp::train {

/// Per-coordinate empirical gradient statistics for one estimator at one
/// sample count, over the sampled variational coordinates (posterior
/// means and covariance factors; the mixture-logit path is identical for
/// both estimators and is excluded).
struct VarianceStudyCell {
  Index s = 0;
  Vector mean_reparam, var_reparam;
  Vector mean_score, var_score;
};

struct VarianceStudyResult {
  std::vector<VarianceStudyCell> cells;  // one per S
  Index redraws = 0;
  double slope_reparam = 0.0;  // log-log slope of mean variance vs S
  double slope_score = 0.0;
  double min_ratio = 0.0;      // min over S and coordinates of var_s / var_r
  double frac_means_within_3se = 0.0;  // unbiasedness cross-check

  std::string table() const;  // plot-ready TSV
};

VarianceStudyResult run_variance_study(const model::ModelState& state,
                                       const obj::Batch& batch, Index n_total,
                                       const std::vector<Index>& sample_counts,
                                       Index redraws, std::uint64_t seed,
                                       int workers = 1);

}  // namespace svgp::train
