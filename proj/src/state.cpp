#include "svgp/model/state.hpp"

#include <cmath>

namespace svgp::model {

Vector MixturePosterior::weights() const {
  const double mx = logits.maxCoeff();
  Vector w = (logits.array() - mx).exp();
  return w / w.sum();
}

ModelState ModelState::init(std::vector<kernels::Kernel> kernels,
                            InducingSet inducing, Index k_components,
                            lik::Likelihood likelihood) {
  ModelState s;
  s.kernels = std::move(kernels);
  s.inducing = std::move(inducing);
  s.likelihood = std::move(likelihood);
  const Index q = s.q();
  const Index m = s.m();
  s.posterior.logits = Vector::Zero(k_components);
  s.posterior.means.assign(k_components, std::vector<Vector>(q, Vector::Zero(m)));
  s.posterior.factors.assign(k_components,
                             std::vector<Matrix>(q, Matrix::Identity(m, m)));
  s.validate();
  return s;
}

void ModelState::validate() const {
  const Index q_latent = q();
  if (q_latent == 0) throw DimensionMismatch("state: no kernels");
  if (likelihood.latent_dim() != q_latent) {
    throw DimensionMismatch(
        "state: likelihood needs " + std::to_string(likelihood.latent_dim()) +
        " latent processes but " + std::to_string(q_latent) + " kernels given");
  }
  if (inducing.shared) {
    if (inducing.count() != 1) throw DimensionMismatch("state: shared inducing set must hold one matrix");
  } else if (inducing.count() != q_latent) {
    throw DimensionMismatch("state: per-process inducing sets must match Q");
  }
  for (const auto& z : inducing.z) {
    if (!z.allFinite()) throw NumericalError("state: non-finite inducing inputs");
    if (z.rows() < 1) throw DimensionMismatch("state: need at least one inducing point");
    if (z.cols() != d()) throw DimensionMismatch("state: inducing input dimension mismatch");
  }
  const Index kk = k();
  if (kk < 1) throw DimensionMismatch("state: need at least one mixture component");
  if (static_cast<Index>(posterior.means.size()) != kk ||
      static_cast<Index>(posterior.factors.size()) != kk) {
    throw DimensionMismatch("state: posterior component count mismatch");
  }
  for (Index c = 0; c < kk; ++c) {
    if (static_cast<Index>(posterior.means[c].size()) != q_latent ||
        static_cast<Index>(posterior.factors[c].size()) != q_latent) {
      throw DimensionMismatch("state: posterior latent count mismatch");
    }
    for (Index j = 0; j < q_latent; ++j) {
      if (posterior.means[c][j].size() != m() ||
          posterior.factors[c][j].rows() != m() ||
          posterior.factors[c][j].cols() != m()) {
        throw DimensionMismatch("state: posterior shape mismatch");
      }
      if ((posterior.factors[c][j].diagonal().array() <= 0.0).any()) {
        throw NumericalError("state: posterior factor diagonal must be positive");
      }
    }
  }
}

Index ModelState::group_size(const std::string& group) const {
  if (group == groups::kTheta) {
    Index n = 0;
    for (const auto& kern : kernels) n += kern.num_params();
    return n;
  }
  if (group == groups::kLambda) {
    const Index tri = m() * (m() + 1) / 2;
    return k() + k() * q() * (m() + tri);
  }
  if (group == groups::kInducing) {
    return inducing.count() * m() * d();
  }
  if (group == groups::kLikelihood) {
    return likelihood.num_params();
  }
  throw std::invalid_argument("unknown parameter group: " + group);
}

Vector ModelState::get_group(const std::string& group) const {
  Vector out(group_size(group));
  Index at = 0;
  if (group == groups::kTheta) {
    for (const auto& kern : kernels) {
      out.segment(at, kern.num_params()) = kern.pack_params();
      at += kern.num_params();
    }
  } else if (group == groups::kLambda) {
    out.segment(at, k()) = posterior.logits;
    at += k();
    for (Index c = 0; c < k(); ++c) {
      for (Index j = 0; j < q(); ++j) {
        out.segment(at, m()) = posterior.means[c][j];
        at += m();
      }
    }
    for (Index c = 0; c < k(); ++c) {
      for (Index j = 0; j < q(); ++j) {
        const Matrix& L = posterior.factors[c][j];
        for (Index r = 0; r < m(); ++r) {
          for (Index col = 0; col < r; ++col) out[at++] = L(r, col);
          out[at++] = std::log(L(r, r));
        }
      }
    }
  } else if (group == groups::kInducing) {
    for (const auto& z : inducing.z) {
      for (Index r = 0; r < z.rows(); ++r) {
        out.segment(at, z.cols()) = z.row(r).transpose();
        at += z.cols();
      }
    }
  } else if (group == groups::kLikelihood) {
    out = likelihood.pack_params();
  } else {
    throw std::invalid_argument("unknown parameter group: " + group);
  }
  return out;
}

void ModelState::set_group(const std::string& group,
                           const Eigen::Ref<const Vector>& v) {
  if (v.size() != group_size(group)) {
    throw DimensionMismatch("set_group(" + group + "): wrong size");
  }
  Index at = 0;
  if (group == groups::kTheta) {
    for (auto& kern : kernels) {
      kern.unpack_params(v.segment(at, kern.num_params()));
      at += kern.num_params();
    }
  } else if (group == groups::kLambda) {
    posterior.logits = v.segment(at, k());
    at += k();
    for (Index c = 0; c < k(); ++c) {
      for (Index j = 0; j < q(); ++j) {
        posterior.means[c][j] = v.segment(at, m());
        at += m();
      }
    }
    for (Index c = 0; c < k(); ++c) {
      for (Index j = 0; j < q(); ++j) {
        Matrix& L = posterior.factors[c][j];
        L.setZero();
        for (Index r = 0; r < m(); ++r) {
          for (Index col = 0; col < r; ++col) L(r, col) = v[at++];
          L(r, r) = std::exp(v[at++]);
        }
      }
    }
  } else if (group == groups::kInducing) {
    for (auto& z : inducing.z) {
      for (Index r = 0; r < z.rows(); ++r) {
        z.row(r) = v.segment(at, z.cols()).transpose();
        at += z.cols();
      }
    }
  } else if (group == groups::kLikelihood) {
    likelihood.unpack_params(v);
  } else {
    throw std::invalid_argument("unknown parameter group: " + group);
  }
}

std::vector<std::string> ModelState::group_names() const {
  return {groups::kTheta, groups::kLambda, groups::kInducing,
          groups::kLikelihood};
}

}  // namespace svgp::model
