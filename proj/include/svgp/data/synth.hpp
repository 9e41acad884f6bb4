#pragma once

#include "svgp/data/dataset.hpp"

namespace svgp::data {

/// Deterministic synthetic datasets for self-contained configurations
/// (gradient checks, variance studies, smoke runs).
struct SynthSpec {
  std::string kind;  // regression_1d | multioutput | gprn | blobs
  Index n = 100;
  Index d = 1;
  Index outputs = 1;       // regression outputs P
  Index node_functions = 1;  // gprn
  Index classes = 2;       // blobs
  double noise_variance = 0.1;
  double lengthscale = 0.4;
  double class_separation = 3.0;  // blobs: center distance over cluster spread
  std::uint64_t seed = 0;
};

Dataset synthesize(const SynthSpec& spec);

/// Draws one GP sample at the rows of x under an RBF kernel.
Vector sample_gp_function(const Matrix& x, double lengthscale, double variance,
                          math::RandomStream& stream);

}  // namespace svgp::data
