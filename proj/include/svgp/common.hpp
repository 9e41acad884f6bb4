#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace svgp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;
using Index = Eigen::Index;

/// Factorization failed even after jitter escalation.
class NotPositiveDefinite : public std::runtime_error {
 public:
  explicit NotPositiveDefinite(const std::string& what)
      : std::runtime_error(what) {}
};

/// A non-finite value surfaced where the math requires finite input.
/// `index` points at the offending datapoint when known (-1 otherwise).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, long index = -1)
      : std::runtime_error(what), index(index) {}
  long index;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  explicit DimensionMismatch(const std::string& what)
      : std::invalid_argument(what) {}
};

}  // namespace svgp
