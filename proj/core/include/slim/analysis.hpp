#pragma once

#include "slim/linops.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace slim {

// Exact desk-scale quantities behind the convergence theory of the damped
// iteration with memory r = 0 and C = I. Expectations over W_k are uniform
// averages over the M partition blocks, so nothing here is sampled.
//
// Notation: G_i = A_i^T A_i, B_i = alpha (I + alpha G_i)^{-1},
// B = E B_k G_k = I - E B_k / alpha.
struct TheoryConstants {
  double alpha = 0.0;
  std::size_t n_blocks = 0;

  Vector x_ls;
  // x_hat = B^{-1} E B_k A_k^T b_k, the fixed point of the expected iteration.
  Vector x_hat;
  // x_hat through x_ls + B^{-1} (E B_k A_k^T W_k^T) Q_A b.
  Vector x_hat_projection;

  Matrix B;
  Matrix EBk_over_alpha;
  double rho = 0.0;  // ||E B_k / alpha||_2
  double lambda_min_B = 0.0;
  double lambda_max_B = 0.0;
  double asymmetry_B = 0.0;  // ||B - B^T||_max before any symmetrization

  // Block Gram spectra.
  double a_max = 0.0;
  double a_min = 0.0;
  // Blocks whose Gram has lambda_min = 0 (relative threshold 1e-12 A_max).
  std::size_t m_zero = 0;
  // True when every block Gram is singular (m_zero == M); a_min then falls
  // back to the smallest positive eigenvalue over all block Grams.
  bool a_min_fallback = false;

  double c = 0.0;      // lambda_min(B) / (1 + alpha A_max)
  double sigma = 0.0;  // E ||A_k^T (A_k x_hat - b_k)||
  double c_const = 0.0;
  double qab_norm = 0.0;  // ||Q_A b||
  double bias_bound = 0.0;

  // Per-block ||B_i G_i||_2 from an SVD of the formed product.
  std::vector<double> block_damped_gram_norm;
};

struct MomentTrace {
  // ||E x_k - x_hat||, k = 0..k_max.
  std::vector<double> mean_gap;
  // E ||x_k - x_hat||^2 = tr(S_k), k = 0..k_max.
  std::vector<double> second_moment;
};

struct InequalityCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

// Dense cached view of a random-access operator: the full matrix, the block
// Grams and their eigendecompositions. Building it once lets the alpha grid
// reuse the factorizations.
class DeskModel {
 public:
  explicit DeskModel(const RowBlockOperator& op);

  std::size_t n_rows() const { return static_cast<std::size_t>(a_.rows()); }
  std::size_t n_cols() const { return static_cast<std::size_t>(a_.cols()); }
  std::size_t n_blocks() const { return blocks_.size(); }
  const Matrix& matrix() const { return a_; }
  const Vector& rhs() const { return b_; }
  const Vector& x_ls() const { return x_ls_; }

  TheoryConstants constants(double alpha) const;

  // ||E B_k A_k^T (A_k x - b_k)||.
  double stationarity_residual(double alpha, const Vector& x) const;

  // Exact first and second moments of x_k - x_hat under i.i.d. uniform
  // block sampling, propagated through
  //   m_k = (E B_k/alpha) m_{k-1}
  //   S_k = (1/M) sum_i [P_i S_{k-1} P_i^T + P_i m_{k-1} d_i^T + d_i m_{k-1}^T P_i^T + d_i d_i^T]
  // with P_i = I - B_i G_i and d_i = -B_i A_i^T (A_i x_hat - b_i).
  MomentTrace moments(const TheoryConstants& constants, const Vector& x0, std::size_t k_max) const;

 private:
  struct Block {
    Matrix a;
    Vector b;
    Vector eigenvalues;
    Matrix eigenvectors;
  };
  // (I + alpha G_i)^{-1}
  Matrix damped_inverse(const Block& blk, double alpha) const;

  Matrix a_;
  Vector b_;
  Vector x_ls_;
  double sigma_max_ = 0.0;
  double sigma_min_ = 0.0;
  std::vector<Block> blocks_;
};

// Least-squares solution through a dense SVD. Throws SingularSystem when
// the condition number exceeds 1e12 and ScaleGuard beyond desk scale.
Vector ls_solution(const RowBlockOperator& op);
Vector ls_solution(const Matrix& a, const Vector& b);

TheoryConstants theory_constants(const RowBlockOperator& op, double alpha);
double stationarity_residual(const TheoryConstants& constants, const RowBlockOperator& op);
MomentTrace moment_recursion(const RowBlockOperator& op, double alpha, const Vector& x0,
                             std::size_t k_max);

// The four statements about B_k and B for a full-column-rank A.
std::vector<InequalityCheck> contraction_checks(const TheoryConstants& constants);

// ||x_hat - x_ls|| against the bias bound.
InequalityCheck bias_bound_check(const TheoryConstants& constants);

// Worst-case ratio checks of a moment trace against the linear rate and the
// horizon bound. Each check holds when lhs <= rhs at every k.
std::vector<InequalityCheck> moment_checks(const TheoryConstants& constants,
                                            const MomentTrace& trace, const Vector& x0,
                                            double rel_slack = 1e-10);

// CSV report: alpha,item,lhs,rhs,holds. Constants are reported with an
// empty rhs and holds column.
void write_theory_report(std::ostream& out, const TheoryConstants& constants,
                         const std::vector<InequalityCheck>& checks, bool header);

}  // namespace slim
