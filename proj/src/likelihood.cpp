#include "svgp/likelihoods/likelihood.hpp"

#include <cmath>
#include <numbers>

#include "svgp/math/linalg.hpp"

namespace svgp::lik {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// log sigma(f) without overflow for either sign of f
inline double log_sigmoid(double f) {
  return f >= 0.0 ? -std::log1p(std::exp(-f)) : f - std::log1p(std::exp(f));
}

inline double sigmoid(double f) {
  return f >= 0.0 ? 1.0 / (1.0 + std::exp(-f))
                  : std::exp(f) / (1.0 + std::exp(f));
}

}  // namespace

Kind kind_from_string(const std::string& s) {
  if (s == "gaussian") return Kind::Gaussian;
  if (s == "logistic") return Kind::Logistic;
  if (s == "softmax") return Kind::Softmax;
  if (s == "gprn") return Kind::Gprn;
  throw std::invalid_argument("unknown likelihood kind: " + s);
}

std::string kind_to_string(Kind k) {
  switch (k) {
    case Kind::Gaussian: return "gaussian";
    case Kind::Logistic: return "logistic";
    case Kind::Softmax: return "softmax";
    case Kind::Gprn: return "gprn";
  }
  return "?";
}

Likelihood Likelihood::gaussian(Index p_outputs, double log_noise_variance) {
  Likelihood l;
  l.kind_ = Kind::Gaussian;
  l.p_outputs_ = p_outputs;
  l.log_noise_ = Vector::Constant(p_outputs, log_noise_variance);
  return l;
}

Likelihood Likelihood::logistic() {
  Likelihood l;
  l.kind_ = Kind::Logistic;
  l.p_outputs_ = 1;
  l.classes_ = 2;
  return l;
}

Likelihood Likelihood::softmax(Index classes) {
  if (classes < 2) throw std::invalid_argument("softmax needs >= 2 classes");
  Likelihood l;
  l.kind_ = Kind::Softmax;
  l.classes_ = classes;
  l.p_outputs_ = 1;
  return l;
}

Likelihood Likelihood::gprn(Index p_outputs, Index q_node,
                            double log_noise_variance) {
  Likelihood l;
  l.kind_ = Kind::Gprn;
  l.p_outputs_ = p_outputs;
  l.q_node_ = q_node;
  l.log_noise_ = Vector::Constant(1, log_noise_variance);
  return l;
}

Index Likelihood::latent_dim() const {
  switch (kind_) {
    case Kind::Gaussian: return p_outputs_;
    case Kind::Logistic: return 1;
    case Kind::Softmax: return classes_;
    case Kind::Gprn: return q_node_ + p_outputs_ * q_node_;
  }
  return 0;
}

double Likelihood::log_density(const Observation& y,
                               const Eigen::Ref<const Vector>& f) const {
  if (f.size() != latent_dim()) {
    throw DimensionMismatch("log_density: latent vector has wrong length");
  }
  if (!f.allFinite()) throw NumericalError("log_density: non-finite latent");

  switch (kind_) {
    case Kind::Gaussian: {
      double acc = 0.0;
      for (Index p = 0; p < p_outputs_; ++p) {
        const double var = std::exp(log_noise_[p]);
        const double r = y.reals[p] - f[p];
        acc += -0.5 * (kLog2Pi + log_noise_[p]) - 0.5 * r * r / var;
      }
      return acc;
    }
    case Kind::Logistic: {
      const double ls = log_sigmoid(f[0]);
      const double lns = log_sigmoid(-f[0]);
      return y.label == 1 ? ls : lns;
    }
    case Kind::Softmax:
      return f[y.label] - math::logsumexp(Vector(f));
    case Kind::Gprn: {
      const double var = std::exp(log_noise_[0]);
      const auto v = f.head(q_node_);
      // W row-major per output: entry (p, q) lives at q_node_ + p*q_node_ + q
      double acc = 0.0;
      for (Index p = 0; p < p_outputs_; ++p) {
        double mean = 0.0;
        for (Index q = 0; q < q_node_; ++q) mean += f[q_node_ + p * q_node_ + q] * v[q];
        const double r = y.reals[p] - mean;
        acc += -0.5 * (kLog2Pi + log_noise_[0]) - 0.5 * r * r / var;
      }
      return acc;
    }
  }
  return 0.0;
}

Likelihood::Grad Likelihood::log_density_grad(
    const Observation& y, const Eigen::Ref<const Vector>& f) const {
  if (f.size() != latent_dim()) {
    throw DimensionMismatch("log_density_grad: latent vector has wrong length");
  }
  if (!f.allFinite()) throw NumericalError("log_density_grad: non-finite latent");

  Grad g;
  g.df = Vector::Zero(latent_dim());
  g.dnoise = Vector::Zero(num_params());

  switch (kind_) {
    case Kind::Gaussian: {
      for (Index p = 0; p < p_outputs_; ++p) {
        const double var = std::exp(log_noise_[p]);
        const double r = y.reals[p] - f[p];
        g.df[p] = r / var;
        g.dnoise[p] = -0.5 + 0.5 * r * r / var;
      }
      break;
    }
    case Kind::Logistic: {
      g.df[0] = (y.label == 1 ? 1.0 : 0.0) - sigmoid(f[0]);
      break;
    }
    case Kind::Softmax: {
      const double lse = math::logsumexp(Vector(f));
      g.df = -(f.array() - lse).exp();
      g.df[y.label] += 1.0;
      break;
    }
    case Kind::Gprn: {
      const double var = std::exp(log_noise_[0]);
      const auto v = f.head(q_node_);
      for (Index p = 0; p < p_outputs_; ++p) {
        double mean = 0.0;
        for (Index q = 0; q < q_node_; ++q) mean += f[q_node_ + p * q_node_ + q] * v[q];
        const double r = y.reals[p] - mean;
        const double c = r / var;
        for (Index q = 0; q < q_node_; ++q) {
          g.df[q] += c * f[q_node_ + p * q_node_ + q];
          g.df[q_node_ + p * q_node_ + q] += c * v[q];
        }
        g.dnoise[0] += -0.5 + 0.5 * r * r / var;
      }
      break;
    }
  }
  return g;
}

void Likelihood::eval_batch(const Observation& y, const Matrix& F, Vector& logp,
                            Matrix* grad_f, Vector* dnoise_acc,
                            double weight) const {
  const Index S = F.rows();
  logp.resize(S);
  if (grad_f) grad_f->resize(S, latent_dim());
  for (Index i = 0; i < S; ++i) {
    logp[i] = log_density(y, F.row(i).transpose());
    if (grad_f) {
      Grad g = log_density_grad(y, F.row(i).transpose());
      grad_f->row(i) = g.df.transpose();
      if (dnoise_acc && g.dnoise.size() > 0) *dnoise_acc += weight * g.dnoise;
    }
  }
}

PredictiveSummary Likelihood::predict(const Matrix& f_samples) const {
  const Index S = f_samples.rows();
  if (S < 1) throw std::invalid_argument("predict: needs at least one sample");
  if (f_samples.cols() != latent_dim()) {
    throw DimensionMismatch("predict: latent sample width mismatch");
  }
  PredictiveSummary out;

  switch (kind_) {
    case Kind::Softmax: {
      out.class_probs = Vector::Zero(classes_);
      for (Index i = 0; i < S; ++i) {
        const Vector f = f_samples.row(i).transpose();
        const double lse = math::logsumexp(f);
        out.class_probs += (f.array() - lse).exp().matrix();
      }
      out.class_probs /= static_cast<double>(S);
      break;
    }
    case Kind::Logistic: {
      double p1 = 0.0;
      for (Index i = 0; i < S; ++i) p1 += sigmoid(f_samples(i, 0));
      p1 /= static_cast<double>(S);
      out.class_probs = Vector(2);
      out.class_probs << 1.0 - p1, p1;
      break;
    }
    case Kind::Gaussian:
    case Kind::Gprn: {
      Matrix means(S, p_outputs_);  // per-sample noiseless mean
      if (kind_ == Kind::Gaussian) {
        means = f_samples;
      } else {
        for (Index i = 0; i < S; ++i) {
          const Vector f = f_samples.row(i).transpose();
          for (Index p = 0; p < p_outputs_; ++p) {
            double m = 0.0;
            for (Index q = 0; q < q_node_; ++q) {
              m += f[q_node_ + p * q_node_ + q] * f[q];
            }
            means(i, p) = m;
          }
        }
      }
      out.mean = means.colwise().mean();
      Vector var = Vector::Zero(p_outputs_);
      if (S > 1) {
        for (Index p = 0; p < p_outputs_; ++p) {
          var[p] = (means.col(p).array() - out.mean[p]).square().sum() / (S - 1);
        }
      }
      for (Index p = 0; p < p_outputs_; ++p) {
        const double noise =
            std::exp(kind_ == Kind::Gaussian ? log_noise_[p] : log_noise_[0]);
        var[p] += noise;
      }
      out.variance = var;
      return out;
    }
  }

  // classification label: argmax, ties broken toward the lowest index
  int best = 0;
  for (Index c = 1; c < out.class_probs.size(); ++c) {
    if (out.class_probs[c] > out.class_probs[best]) best = static_cast<int>(c);
  }
  out.label = best;
  return out;
}

double Likelihood::log_predictive(const Observation& y,
                                  const PredictiveSummary& s) const {
  if (is_classification()) {
    const double p = s.class_probs[y.label];
    return std::log(std::max(p, 1e-300));
  }
  double acc = 0.0;
  for (Index p = 0; p < p_outputs_; ++p) {
    const double r = y.reals[p] - s.mean[p];
    acc += -0.5 * (kLog2Pi + std::log(s.variance[p])) -
           0.5 * r * r / s.variance[p];
  }
  return acc;
}

Index Likelihood::num_params() const { return log_noise_.size(); }

Vector Likelihood::pack_params() const { return log_noise_; }

void Likelihood::unpack_params(const Eigen::Ref<const Vector>& p) {
  if (p.size() != num_params()) {
    throw DimensionMismatch("likelihood unpack_params: wrong parameter count");
  }
  log_noise_ = p;
}

}  // namespace svgp::lik
