#pragma once

#include "slim/linops.hpp"
#include "slim/types.hpp"

#include <optional>
#include <vector>

namespace slim {

// Positive definite C_k = L^T L. The identity has no stored factor.
class Regularizer {
 public:
  static Regularizer identity();
  // C = L^T L with L given; L must be square.
  static Regularizer from_factor(Matrix l);
  // C given directly. A Cholesky factor is computed once and cached; for
  // singular positive semi-definite C the symmetric square root is used.
  static Regularizer from_gram(Matrix c);

  bool is_identity() const { return identity_; }
  std::size_t dim() const { return static_cast<std::size_t>(factor_.cols()); }
  // L with C = L^T L (empty for the identity).
  const Matrix& factor() const { return factor_; }
  // C, formed for an n-dimensional problem.
  Matrix gram(std::size_t n) const;
  // C x.
  Vector apply_gram(const Vector& x) const;
  // 2-norm condition estimate of L (1 for the identity).
  double condition_estimate() const;
  // Smallest singular value of L; 0 when unknown (above the desk-scale
  // limit or singular).
  double min_singular_value() const { return smin_; }

 private:
  bool identity_ = true;
  Matrix factor_;
  Matrix gram_;
  double smin_ = 1.0;
};

// Row stack [A_{k-r}; ...; A_k]. The last block is the current sample.
// Holds non-owning pointers; the blocks must outlive the stack.
class BlockStack {
 public:
  BlockStack() = default;
  explicit BlockStack(std::vector<const Matrix*> blocks);
  // Sparse blocks stay sparse.
  explicit BlockStack(const std::vector<const SampleBlock*>& blocks);

  std::size_t size() const { return blocks_.size(); }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t current_rows() const { return rows_of(blocks_.back()); }

  Vector apply(const Vector& s) const;          // M s
  Vector apply_adjoint(const Vector& u) const;  // M^T u
  Vector current_adjoint(const Vector& u) const;  // A_k^T u
  Matrix gram() const;                          // M^T M

 private:
  struct Entry {
    const Matrix* dense = nullptr;
    const SparseMatrix* sparse = nullptr;
  };
  static std::size_t rows_of(const Entry& e);
  void finish();

  std::vector<Entry> blocks_;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
};

struct LsqrOptions {
  double rel_tolerance = 1e-10;
  // 0 selects 2n.
  std::size_t max_iterations = 0;
  // Start from zero so that consistent/undamped problems return the
  // minimum-norm solution. When false, initial_guess (if set) is used.
  bool min_norm_mode = true;
  std::optional<Vector> initial_guess;
  // Record the residual-norm estimate after every iteration.
  bool track_history = false;
};

struct InnerSolveResult {
  Vector step;
  std::size_t iterations = 0;
  bool converged = true;
  // ||(C/alpha + M^T M) s - A_k^T r|| / ||A_k^T r|| evaluated explicitly.
  double rel_normal_residual = 0.0;
  std::vector<double> residual_history;
};

// Step s_k of the limited-memory iteration: the least-squares solution of
//
//   [ A_{k-r}           ]       [ 0 ]
//   [   ...             ]       [...]
//   [ A_k               ] s  ~  [ r ]      r = A_k x_{k-1} - b_k
//   [ alpha^{-1/2} L_k  ]       [ 0 ]
//
// computed with LSQR. For L_k = I the damping is handled inside the
// bidiagonalization instead of as extra rows. Non-convergence is reported
// through `converged`, never thrown.
InnerSolveResult lsqr_damped(const BlockStack& stack, const Vector& residual, double alpha,
                             const Regularizer& reg, const LsqrOptions& opts = {});

// Same step from the normal equations (C/alpha + M^T M) s = A_k^T r via a
// dense Cholesky factorization. Throws SingularSystem if the factorization
// fails.
Vector direct_step(const BlockStack& stack, const Vector& residual, double alpha,
                   const Regularizer& reg);

// Minimum-norm least-squares solution of a s = rhs (LSQR, zero damping).
InnerSolveResult lsqr_min_norm(const Matrix& a, const Vector& rhs, const LsqrOptions& opts = {});
InnerSolveResult lsqr_min_norm(const SampleBlock& a, const Vector& rhs, const LsqrOptions& opts = {});

// Generalized form used by the Tikhonov-augmented iteration:
//
//   min || [M; kappa L] s - [0; ...; r; t] ||
//
// where t (length n) is the right-hand side of the regularization rows;
// pass an empty vector for t = 0. lsqr_damped is the case kappa = alpha^{-1/2},
// t = 0.
InnerSolveResult lsqr_regularized(const BlockStack& stack, const Vector& residual, double kappa,
                                  const Regularizer& reg, const Vector& reg_rhs,
                                  const LsqrOptions& opts = {});
// Normal equations (kappa^2 C + M^T M) s = A_k^T r + kappa L^T t, dense Cholesky.
Vector direct_regularized(const BlockStack& stack, const Vector& residual, double kappa,
                          const Regularizer& reg, const Vector& reg_rhs);

double relative_normal_residual(const BlockStack& stack, const Vector& residual, double alpha,
                                const Regularizer& reg, const Vector& step);

}  // namespace slim
