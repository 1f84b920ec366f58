#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace slim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input dimensions, out-of-range indices, invalid parameters.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Access-contract violation on a single-pass source (past/future block,
// second pass, random access on a stream).
class StreamError : public Error {
 public:
  using Error::Error;
};

// Non-finite or exploding iterate.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Singular or rank-deficient system where a factorization requires full rank.
class SingularSystem : public Error {
 public:
  using Error::Error;
};

// Problem too large for a dense desk-scale computation.
class ScaleGuard : public Error {
 public:
  using Error::Error;
};

// Largest n for which dense n x n theory computations are permitted.
inline constexpr std::size_t kDeskScaleLimit = 2000;

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace slim
