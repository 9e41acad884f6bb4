#include "svgp/train/kmeans.hpp"

#include <limits>
#include <vector>

namespace svgp::train {

namespace {

Index sample_proportional(const Vector& weights, double u) {
  const double total = weights.sum();
  double acc = 0.0;
  for (Index i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u * total <= acc) return i;
  }
  return weights.size() - 1;
}

}  // namespace

Matrix kmeans_init(const Matrix& x, Index m, math::RandomStream stream) {
  const Index n = x.rows();
  if (m > n) {
    throw std::invalid_argument("kmeans_init: more centroids than points");
  }
  if (m < 1) throw std::invalid_argument("kmeans_init: need m >= 1");

  // k-means++ seeding
  Matrix centroids(m, x.cols());
  Vector min_d2 = Vector::Constant(n, std::numeric_limits<double>::infinity());
  const Index first = static_cast<Index>(stream.next_u64() % n);
  centroids.row(0) = x.row(first);
  for (Index c = 1; c < m; ++c) {
    for (Index i = 0; i < n; ++i) {
      const double d2 = (x.row(i) - centroids.row(c - 1)).squaredNorm();
      if (d2 < min_d2[i]) min_d2[i] = d2;
    }
    if (min_d2.sum() <= 0.0) {
      // all remaining points coincide with chosen centroids
      centroids.row(c) = x.row(static_cast<Index>(stream.next_u64() % n));
      continue;
    }
    const Index pick = sample_proportional(min_d2, stream.next_uniform());
    centroids.row(c) = x.row(pick);
  }

  // Lloyd iterations
  std::vector<Index> assign(n, 0);
  for (int iter = 0; iter < 50; ++iter) {
    for (Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      Index arg = 0;
      for (Index c = 0; c < m; ++c) {
        const double d2 = (x.row(i) - centroids.row(c)).squaredNorm();
        if (d2 < best) {
          best = d2;
          arg = c;
        }
      }
      assign[i] = arg;
    }

    Matrix next = Matrix::Zero(m, x.cols());
    Vector counts = Vector::Zero(m);
    for (Index i = 0; i < n; ++i) {
      next.row(assign[i]) += x.row(i);
      counts[assign[i]] += 1.0;
    }
    for (Index c = 0; c < m; ++c) {
      if (counts[c] > 0.0) {
        next.row(c) /= counts[c];
      } else {
        // reseed to the point farthest from its assigned centroid
        double worst = -1.0;
        Index arg = 0;
        for (Index i = 0; i < n; ++i) {
          const double d2 = (x.row(i) - centroids.row(assign[i])).squaredNorm();
          if (d2 > worst) {
            worst = d2;
            arg = i;
          }
        }
        next.row(c) = x.row(arg);
      }
    }
    const double shift = (next - centroids).rowwise().norm().maxCoeff();
    centroids = next;
    if (shift < 1e-6) break;
  }
  return centroids;
}

}  // namespace svgp::train
