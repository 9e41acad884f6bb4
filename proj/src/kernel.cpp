#include "svgp/kernels/kernel.hpp"

#include <cmath>
#include <numbers>

namespace svgp::kernels {

namespace {

constexpr double kPi = std::numbers::pi;

// Angular factors of the arc-cosine family.
inline double j_fun(int d, double phi) {
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  switch (d) {
    case 0: return kPi - phi;
    case 1: return s + (kPi - phi) * c;
    case 2: return 3.0 * s * c + (kPi - phi) * (1.0 + 2.0 * c * c);
    default: throw std::invalid_argument("arc-cosine degree must be 0, 1 or 2");
  }
}

inline double j_at_zero(int d) {
  switch (d) {
    case 0: return kPi;
    case 1: return kPi;
    case 2: return 3.0 * kPi;
    default: throw std::invalid_argument("arc-cosine degree must be 0, 1 or 2");
  }
}

// T_d(phi) = -J_d'(phi)/sin(phi); the combination that stays finite for
// d >= 1. Degree 0 has a genuine kink at phi = 0 or pi; subgradient 0.
inline double t_fun(int d, double phi, double sin_phi) {
  switch (d) {
    case 0: return sin_phi > 1e-9 ? 1.0 / sin_phi : 0.0;
    case 1: return kPi - phi;
    case 2: return 4.0 * j_fun(1, phi);
    default: throw std::invalid_argument("arc-cosine degree must be 0, 1 or 2");
  }
}

inline double clamp_unit(double u) { return std::min(1.0, std::max(-1.0, u)); }

inline double powi(double base, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

// Diagonal chain kappa_l(x, x) as a function of a = ||x||^2.
inline double arc_diag_chain(int degree, int depth, double a) {
  double p = powi(a, degree) * j_at_zero(degree) / kPi;
  for (int l = 1; l < depth; ++l) p = powi(p, degree) * j_at_zero(degree) / kPi;
  return p;
}

}  // namespace

Kind kind_from_string(const std::string& s) {
  if (s == "rbf_ard") return Kind::RbfArd;
  if (s == "rbf_iso") return Kind::RbfIso;
  if (s == "arc_cosine") return Kind::ArcCosine;
  throw std::invalid_argument("unknown kernel kind: " + s);
}

std::string kind_to_string(Kind k) {
  switch (k) {
    case Kind::RbfArd: return "rbf_ard";
    case Kind::RbfIso: return "rbf_iso";
    case Kind::ArcCosine: return "arc_cosine";
  }
  return "?";
}

Kernel Kernel::rbf_ard(Index dim, double log_variance, double log_lengthscale) {
  Kernel k;
  k.kind_ = Kind::RbfArd;
  k.dim_ = dim;
  k.log_variance_ = log_variance;
  k.log_lengthscales_ = Vector::Constant(dim, log_lengthscale);
  return k;
}

Kernel Kernel::rbf_iso(Index dim, double log_variance, double log_lengthscale) {
  Kernel k;
  k.kind_ = Kind::RbfIso;
  k.dim_ = dim;
  k.log_variance_ = log_variance;
  k.log_lengthscales_ = Vector::Constant(1, log_lengthscale);
  return k;
}

Kernel Kernel::arc_cosine(Index dim, int degree, int depth, double log_variance) {
  if (degree < 0 || degree > 2) {
    throw std::invalid_argument("arc-cosine degree must be 0, 1 or 2");
  }
  if (depth < 1) throw std::invalid_argument("arc-cosine depth must be >= 1");
  Kernel k;
  k.kind_ = Kind::ArcCosine;
  k.dim_ = dim;
  k.degree_ = degree;
  k.depth_ = depth;
  k.log_variance_ = log_variance;
  return k;
}

Vector Kernel::lengthscales() const {
  if (kind_ == Kind::RbfIso) {
    return Vector::Constant(dim_, std::exp(log_lengthscales_[0]));
  }
  return log_lengthscales_.array().exp();
}

Matrix Kernel::scaled(const Matrix& X) const {
  return X * lengthscales().cwiseInverse().asDiagonal();
}

double Kernel::rbf_eval(const Eigen::Ref<const Vector>& x,
                        const Eigen::Ref<const Vector>& x2) const {
  const Vector ls = lengthscales();
  double d2 = 0.0;
  for (Index i = 0; i < dim_; ++i) {
    const double diff = (x[i] - x2[i]) / ls[i];
    d2 += diff * diff;
  }
  return std::exp(log_variance_) * std::exp(-d2);
}

double Kernel::arc_eval(const Eigen::Ref<const Vector>& x,
                        const Eigen::Ref<const Vector>& x2) const {
  const double a = x.squaredNorm();
  const double b = x2.squaredNorm();
  if (a == 0.0 || b == 0.0) {
    throw NumericalError("arc_cosine: zero-norm input");
  }
  const double s = x.dot(x2);
  double p = powi(a, degree_) * j_at_zero(degree_) / kPi;
  double r = powi(b, degree_) * j_at_zero(degree_) / kPi;
  const double u0 = clamp_unit(s / std::sqrt(a * b));
  double q = std::pow(a * b, 0.5 * degree_) * j_fun(degree_, std::acos(u0)) / kPi;
  for (int l = 1; l < depth_; ++l) {
    const double u = clamp_unit(q / std::sqrt(p * r));
    q = std::pow(p * r, 0.5 * degree_) * j_fun(degree_, std::acos(u)) / kPi;
    p = powi(p, degree_) * j_at_zero(degree_) / kPi;
    r = powi(r, degree_) * j_at_zero(degree_) / kPi;
  }
  return std::exp(log_variance_) * q;
}

double Kernel::eval(const Eigen::Ref<const Vector>& x,
                    const Eigen::Ref<const Vector>& x2) const {
  if (x.size() != dim_ || x2.size() != dim_) {
    throw DimensionMismatch("kernel eval: input dimension mismatch");
  }
  return kind_ == Kind::ArcCosine ? arc_eval(x, x2) : rbf_eval(x, x2);
}

Matrix Kernel::gram(const Matrix& X1, const Matrix& X2) const {
  if (X1.cols() != dim_ || X2.cols() != dim_) {
    throw DimensionMismatch("gram: input dimension mismatch");
  }
  const Index n1 = X1.rows(), n2 = X2.rows();
  if (kind_ != Kind::ArcCosine) {
    const Matrix s1 = scaled(X1), s2 = scaled(X2);
    const Vector sq1 = s1.rowwise().squaredNorm();
    const Vector sq2 = s2.rowwise().squaredNorm();
    Matrix d2 = -2.0 * (s1 * s2.transpose());
    d2.colwise() += sq1;
    d2.rowwise() += sq2.transpose();
    return std::exp(log_variance_) * (-d2.array().max(0.0)).exp();
  }

  const Vector a = X1.rowwise().squaredNorm();
  const Vector b = X2.rowwise().squaredNorm();
  if ((a.array() == 0.0).any() || (b.array() == 0.0).any()) {
    throw NumericalError("arc_cosine: zero-norm input");
  }
  Matrix S = X1 * X2.transpose();

  Eigen::ArrayXd p = (a.array().pow(degree_) * j_at_zero(degree_) / kPi);
  Eigen::ArrayXd r = (b.array().pow(degree_) * j_at_zero(degree_) / kPi);
  Eigen::ArrayXXd q(n1, n2);
  for (Index i = 0; i < n1; ++i) {
    for (Index j = 0; j < n2; ++j) {
      const double u = clamp_unit(S(i, j) / std::sqrt(a[i] * b[j]));
      q(i, j) = std::pow(a[i] * b[j], 0.5 * degree_) *
                j_fun(degree_, std::acos(u)) / kPi;
    }
  }
  for (int l = 1; l < depth_; ++l) {
    for (Index i = 0; i < n1; ++i) {
      for (Index j = 0; j < n2; ++j) {
        const double u = clamp_unit(q(i, j) / std::sqrt(p[i] * r[j]));
        q(i, j) = std::pow(p[i] * r[j], 0.5 * degree_) *
                  j_fun(degree_, std::acos(u)) / kPi;
      }
    }
    p = p.pow(degree_) * j_at_zero(degree_) / kPi;
    r = r.pow(degree_) * j_at_zero(degree_) / kPi;
  }
  return std::exp(log_variance_) * q.matrix();
}

Matrix Kernel::gram(const Matrix& X) const {
  Matrix K = gram(X, X);
  // enforce exact symmetry for the same-object case
  for (Index i = 0; i < K.rows(); ++i) {
    for (Index j = 0; j < i; ++j) K(j, i) = K(i, j);
  }
  return K;
}

Vector Kernel::gram_diag(const Matrix& X) const {
  if (kind_ != Kind::ArcCosine) {
    return Vector::Constant(X.rows(), std::exp(log_variance_));
  }
  const Vector a = X.rowwise().squaredNorm();
  if ((a.array() == 0.0).any()) {
    throw NumericalError("arc_cosine: zero-norm input");
  }
  Vector out(X.rows());
  for (Index i = 0; i < X.rows(); ++i) {
    out[i] = std::exp(log_variance_) * arc_diag_chain(degree_, depth_, a[i]);
  }
  return out;
}

Index Kernel::num_params() const {
  switch (kind_) {
    case Kind::RbfArd: return 1 + dim_;
    case Kind::RbfIso: return 2;
    case Kind::ArcCosine: return 1;
  }
  return 0;
}

Vector Kernel::pack_params() const {
  Vector p(num_params());
  p[0] = log_variance_;
  if (kind_ != Kind::ArcCosine) p.tail(log_lengthscales_.size()) = log_lengthscales_;
  return p;
}

void Kernel::unpack_params(const Eigen::Ref<const Vector>& p) {
  if (p.size() != num_params()) {
    throw DimensionMismatch("kernel unpack_params: wrong parameter count");
  }
  log_variance_ = p[0];
  if (kind_ != Kind::ArcCosine) log_lengthscales_ = p.tail(p.size() - 1);
}

std::vector<std::string> Kernel::param_names() const {
  std::vector<std::string> names{"log_variance"};
  if (kind_ == Kind::RbfArd) {
    for (Index i = 0; i < dim_; ++i) {
      names.push_back("log_lengthscale[" + std::to_string(i) + "]");
    }
  } else if (kind_ == Kind::RbfIso) {
    names.push_back("log_lengthscale");
  }
  return names;
}

std::vector<Matrix> Kernel::gram_grad(const Matrix& X1, const Matrix& X2) const {
  const Matrix K = gram(X1, X2);
  std::vector<Matrix> grads;
  grads.push_back(K);  // d/d log_variance is the Gram itself for all kinds
  if (kind_ == Kind::ArcCosine) return grads;

  const Matrix s1 = scaled(X1), s2 = scaled(X2);
  if (kind_ == Kind::RbfArd) {
    for (Index i = 0; i < dim_; ++i) {
      Matrix d2i = s1.col(i).replicate(1, X2.rows());
      d2i.rowwise() -= s2.col(i).transpose();
      grads.push_back(2.0 * K.cwiseProduct(d2i.cwiseAbs2()));
    }
  } else {  // isotropic: one tied lengthscale, gradients summed across dims
    Matrix acc = Matrix::Zero(X1.rows(), X2.rows());
    for (Index i = 0; i < dim_; ++i) {
      Matrix d2i = s1.col(i).replicate(1, X2.rows());
      d2i.rowwise() -= s2.col(i).transpose();
      acc += d2i.cwiseAbs2();
    }
    grads.push_back(2.0 * K.cwiseProduct(acc));
  }
  return grads;
}

Vector Kernel::gram_grad_contract(const Matrix& X1, const Matrix& X2,
                                  const Matrix& K, const Matrix& W) const {
  Vector out = Vector::Zero(num_params());
  const Matrix V = W.cwiseProduct(K);
  out[0] = V.sum();
  if (kind_ == Kind::ArcCosine) return out;

  // sum_ab V_ab * 2 (x_ai - z_bi)^2 / l_i^2 per dimension, assembled from
  // the rank expansions of the squared difference.
  const Matrix s1 = scaled(X1), s2 = scaled(X2);
  const Vector row_sums = V.rowwise().sum();
  const Vector col_sums = V.colwise().sum();
  const Matrix VS2 = V * s2;  // N1 x D
  Vector per_dim(dim_);
  for (Index i = 0; i < dim_; ++i) {
    const double t1 = row_sums.dot(s1.col(i).cwiseAbs2());
    const double t2 = col_sums.dot(s2.col(i).cwiseAbs2());
    const double t3 = s1.col(i).dot(VS2.col(i));
    per_dim[i] = 2.0 * (t1 + t2 - 2.0 * t3);
  }
  if (kind_ == Kind::RbfArd) {
    out.tail(dim_) = per_dim;
  } else {
    out[1] = per_dim.sum();
  }
  return out;
}

Vector Kernel::diag_grad_contract(const Matrix& X, const Vector& diag,
                                  const Vector& w) const {
  Vector out = Vector::Zero(num_params());
  out[0] = w.dot(diag);  // diag scales with exp(log_variance) for all kinds
  // RBF diagonal is constant in the lengthscales; nothing else to add.
  (void)X;
  return out;
}

Matrix Kernel::grad_x1_contract(const Matrix& X1, const Matrix& X2,
                                const Matrix& K, const Matrix& U) const {
  if (kind_ != Kind::ArcCosine) {
    const Matrix V = U.cwiseProduct(K);
    const Vector row_sums = V.rowwise().sum();
    Matrix G = V * X2;
    G -= row_sums.asDiagonal() * X1;
    const Vector inv_sq = lengthscales().cwiseAbs2().cwiseInverse();
    return 2.0 * (G * inv_sq.asDiagonal());
  }

  // kappa(x, z) depends on x only through a = ||x||^2 and s = x.z, so the
  // contraction needs just dkappa/da and dkappa/ds per pair.
  const Index n1 = X1.rows(), n2 = X2.rows();
  const Vector a = X1.rowwise().squaredNorm();
  const Vector b = X2.rowwise().squaredNorm();
  if ((a.array() == 0.0).any() || (b.array() == 0.0).any()) {
    throw NumericalError("arc_cosine: zero-norm input");
  }
  const Matrix S = X1 * X2.transpose();
  const double scale = std::exp(log_variance_);
  const int d = degree_;

  Matrix dKda(n1, n2), dKds(n1, n2);
  for (Index i = 0; i < n1; ++i) {
    // per-row diagonal chain and its derivative in a
    for (Index j = 0; j < n2; ++j) {
      double p = powi(a[i], d) * j_at_zero(d) / kPi;
      double dp_da = (d == 0) ? 0.0 : d * powi(a[i], d - 1) * j_at_zero(d) / kPi;
      double r = powi(b[j], d) * j_at_zero(d) / kPi;

      const double ab = a[i] * b[j];
      const double u0 = clamp_unit(S(i, j) / std::sqrt(ab));
      const double phi0 = std::acos(u0);
      const double sin0 = std::sqrt(std::max(0.0, 1.0 - u0 * u0));
      const double c0 = std::pow(ab, 0.5 * d);
      double q = c0 * j_fun(d, phi0) / kPi;
      const double t0 = t_fun(d, phi0, sin0);
      // dq/du = -c0 * T_d(phi) / pi; du0/ds = 1/sqrt(ab); du0/da = -u0/(2a)
      double dq_ds = -(c0 * t0 / kPi) / std::sqrt(ab);
      double dq_da = (d == 0)
                         ? 0.0
                         : (0.5 * d) * std::pow(a[i], 0.5 * d - 1.0) *
                               std::pow(b[j], 0.5 * d) * j_fun(d, phi0) / kPi;
      dq_da += (c0 * t0 / kPi) * (u0 / (2.0 * a[i]));

      for (int l = 1; l < depth_; ++l) {
        const double pr = p * r;
        const double u = clamp_unit(q / std::sqrt(pr));
        const double phi = std::acos(u);
        const double sphi = std::sqrt(std::max(0.0, 1.0 - u * u));
        const double c = std::pow(pr, 0.5 * d);
        const double t = t_fun(d, phi, sphi);
        const double dq_next_dq = -(c * t / kPi) / std::sqrt(pr);
        double dq_next_dp =
            (d == 0) ? 0.0
                     : (0.5 * d) * std::pow(p, 0.5 * d - 1.0) *
                           std::pow(r, 0.5 * d) * j_fun(d, phi) / kPi;
        dq_next_dp += (c * t / kPi) * (u / (2.0 * p));

        const double q_next = c * j_fun(d, phi) / kPi;
        const double dq_next_da = dq_next_dq * dq_da + dq_next_dp * dp_da;
        const double dq_next_ds = dq_next_dq * dq_ds;

        const double dp_next_dp =
            (d == 0) ? 0.0 : d * powi(p, d - 1) * j_at_zero(d) / kPi;
        p = powi(p, d) * j_at_zero(d) / kPi;
        dp_da *= dp_next_dp;
        r = powi(r, d) * j_at_zero(d) / kPi;
        q = q_next;
        dq_da = dq_next_da;
        dq_ds = dq_next_ds;
      }
      dKda(i, j) = scale * dq_da;
      dKds(i, j) = scale * dq_ds;
    }
  }

  const Matrix Va = U.cwiseProduct(dKda);
  const Matrix Vs = U.cwiseProduct(dKds);
  Matrix G = Vs * X2;
  G += (2.0 * Va.rowwise().sum()).asDiagonal() * X1;
  return G;
}

}  // namespace svgp::kernels
