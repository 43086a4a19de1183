#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace cem {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Thrown for malformed input: bad counts, shape mismatches, invalid configs.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a factorization or eigensolve fails.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class Family { displacement, pressure };

inline const char* to_string(Family f) {
  return f == Family::displacement ? "displacement" : "pressure";
}

} // namespace cem
