#include "svgp/data/synth.hpp"

#include <cmath>

#include "svgp/kernels/kernel.hpp"
#include "svgp/math/linalg.hpp"

namespace svgp::data {

Vector sample_gp_function(const Matrix& x, double lengthscale, double variance,
                          math::RandomStream& stream) {
  auto kern = kernels::Kernel::rbf_ard(x.cols(), std::log(variance),
                                       std::log(lengthscale));
  Matrix k = kern.gram(x);
  auto [l, jit] = math::jittered_cholesky(k, 1e-8 * std::max(1.0, variance));
  (void)jit;
  Vector eps = math::draw_standard_normals(stream, x.rows());
  return l.m * eps;
}

Dataset synthesize(const SynthSpec& spec) {
  math::RandomStream stream(spec.seed, 0xC0FFEE);
  Dataset d;
  d.name = "synthetic:" + spec.kind;

  if (spec.kind == "regression_1d" || spec.kind == "multioutput") {
    const Index p = spec.kind == "regression_1d" ? 1 : spec.outputs;
    d.task = Task::Regression;
    d.x.resize(spec.n, spec.d);
    for (Index i = 0; i < spec.n; ++i) {
      for (Index j = 0; j < spec.d; ++j) {
        d.x(i, j) = 4.0 * stream.next_uniform() - 2.0;
      }
    }
    d.y_real.resize(spec.n, p);
    for (Index out = 0; out < p; ++out) {
      Vector f = sample_gp_function(d.x, spec.lengthscale, 1.0, stream);
      const double sd = std::sqrt(spec.noise_variance);
      for (Index i = 0; i < spec.n; ++i) {
        d.y_real(i, out) = f[i] + sd * stream.next_normal();
      }
    }
    return d;
  }

  if (spec.kind == "gprn") {
    d.task = Task::Regression;
    d.x.resize(spec.n, spec.d);
    for (Index i = 0; i < spec.n; ++i) {
      for (Index j = 0; j < spec.d; ++j) {
        d.x(i, j) = 4.0 * stream.next_uniform() - 2.0;
      }
    }
    const Index p = spec.outputs, qn = spec.node_functions;
    std::vector<Vector> nodes(qn), weights(p * qn);
    for (Index q = 0; q < qn; ++q) {
      nodes[q] = sample_gp_function(d.x, spec.lengthscale, 1.0, stream);
    }
    for (Index w = 0; w < p * qn; ++w) {
      weights[w] = sample_gp_function(d.x, 2.0 * spec.lengthscale, 1.0, stream);
    }
    d.y_real.resize(spec.n, p);
    const double sd = std::sqrt(spec.noise_variance);
    for (Index i = 0; i < spec.n; ++i) {
      for (Index out = 0; out < p; ++out) {
        double mean = 0.0;
        for (Index q = 0; q < qn; ++q) {
          mean += weights[out * qn + q][i] * nodes[q][i];
        }
        d.y_real(i, out) = mean + sd * stream.next_normal();
      }
    }
    return d;
  }

  if (spec.kind == "blobs") {
    const Index c = spec.classes;
    d.task = c == 2 ? Task::Binary : Task::Multiclass;
    d.num_classes = c;
    Matrix centers(c, spec.d);
    for (Index k = 0; k < c; ++k) {
      for (Index j = 0; j < spec.d; ++j) centers(k, j) = stream.next_normal();
      centers.row(k) *= spec.class_separation / centers.row(k).norm();
    }
    d.x.resize(spec.n, spec.d);
    d.y_label.resize(spec.n);
    for (Index i = 0; i < spec.n; ++i) {
      const Index k = static_cast<Index>(stream.next_u64() % c);
      d.y_label[i] = static_cast<int>(k);
      for (Index j = 0; j < spec.d; ++j) {
        d.x(i, j) = centers(k, j) + stream.next_normal();
      }
    }
    return d;
  }

  throw std::invalid_argument("synthesize: unknown kind '" + spec.kind + "'");
}

}  // namespace svgp::data
