#pragma once

#include "svgp/common.hpp"
#include "svgp/math/random.hpp"

namespace svgp::train {

/// Lloyd's algorithm with k-means++ seeding. Runs at most 50 iterations
/// or until the centroid shift drops below 1e-6; empty clusters are
/// reseeded to the point farthest from its assigned centroid.
Matrix kmeans_init(const Matrix& x, Index m, math::RandomStream stream);

}  // namespace svgp::train
