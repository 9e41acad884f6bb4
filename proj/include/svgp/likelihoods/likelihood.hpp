#pragma once

#include <string>
#include <variant>
#include <vector>

#include "svgp/common.hpp"

namespace svgp::lik {

enum class Kind { Gaussian, Logistic, Softmax, Gprn };

Kind kind_from_string(const std::string& s);
std::string kind_to_string(Kind k);

/// One observed target: a real vector for regression/GPRN, a binary label
/// or class index for classification.
struct Observation {
  Vector reals;   // regression targets (P entries) when used
  int label = 0;  // class index / binary label when used
  bool is_real = false;

  static Observation of(const Vector& y) { return {y, 0, true}; }
  static Observation of(int y) { return {Vector(), y, false}; }
};

struct PredictiveSummary {
  // classification
  Vector class_probs;  // C entries (logistic reports {P(0), P(1)})
  int label = -1;
  // regression
  Vector mean;      // P entries
  Vector variance;  // P entries, includes observation noise
};

/// Conditional likelihood p(y_n | f_n) over the Q latent values at one
/// point. Noise parameters live in log space and are trainable.
class Likelihood {
 public:
  Likelihood() = default;

  static Likelihood gaussian(Index p_outputs, double log_noise_variance);
  static Likelihood logistic();
  static Likelihood softmax(Index classes);
  /// GPRN: latent layout per point is [node values v (q_node), then the
  /// weight matrix W row-major (p_outputs x q_node)]; y = W v + noise with
  /// one shared noise variance.
  static Likelihood gprn(Index p_outputs, Index q_node,
                         double log_noise_variance);

  Kind kind() const { return kind_; }
  Index latent_dim() const;  // Q implied by the variant
  Index output_dim() const { return p_outputs_; }
  Index num_classes() const { return classes_; }
  Index q_node() const { return q_node_; }
  bool is_classification() const {
    return kind_ == Kind::Logistic || kind_ == Kind::Softmax;
  }

  double log_density(const Observation& y,
                     const Eigen::Ref<const Vector>& f) const;

  struct Grad {
    Vector df;     // Q entries
    Vector dnoise; // one per noise parameter (empty when none)
  };
  Grad log_density_grad(const Observation& y,
                        const Eigen::Ref<const Vector>& f) const;

  /// Batched evaluation over S latent samples (rows of F). Fills logp (S)
  /// and, when grad is non-null, the per-sample df matrix (S x Q); noise
  /// gradients accumulate into dnoise_acc scaled by `weight`.
  void eval_batch(const Observation& y, const Matrix& F, Vector& logp,
                  Matrix* grad_f, Vector* dnoise_acc, double weight) const;

  /// Monte Carlo predictive summary from S latent samples (rows of F).
  PredictiveSummary predict(const Matrix& f_samples) const;

  /// log of the predictive probability/density of y under a summary.
  double log_predictive(const Observation& y,
                        const PredictiveSummary& s) const;

  // --- trainable noise parameters (log variances) ---
  Index num_params() const;
  Vector pack_params() const;
  void unpack_params(const Eigen::Ref<const Vector>& p);

 private:
  Kind kind_ = Kind::Gaussian;
  Index p_outputs_ = 1;
  Index classes_ = 2;
  Index q_node_ = 1;
  Vector log_noise_;  // P entries (Gaussian), 1 entry (GPRN), else empty
};

}  // namespace svgp::lik
