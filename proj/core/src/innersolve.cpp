#include "slim/innersolve.hpp"

#include <cmath>

namespace slim {

Regularizer Regularizer::identity() { return Regularizer{}; }

Regularizer Regularizer::from_factor(Matrix l) {
  require(l.rows() == l.cols() && l.rows() > 0, "regularization factor must be square");
  Regularizer reg;
  reg.identity_ = false;
  reg.gram_ = l.transpose() * l;
  reg.factor_ = std::move(l);
  reg.smin_ = 0.0;
  if (reg.dim() <= kDeskScaleLimit) {
    Eigen::BDCSVD<Matrix> svd(reg.factor_);
    const auto& sv = svd.singularValues();
    reg.smin_ = sv(sv.size() - 1);
    require(reg.smin_ > 0.0 && sv(0) <= 1e12 * reg.smin_, "regularization factor L must be invertible");
  }
  return reg;
}

Regularizer Regularizer::from_gram(Matrix c) {
  require(c.rows() == c.cols() && c.rows() > 0, "regularization matrix must be square");
  Regularizer reg;
  reg.identity_ = false;
  Eigen::LLT<Matrix> llt(c);
  if (llt.info() == Eigen::Success) {
    reg.factor_ = llt.matrixU();
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(c);
    const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    reg.factor_ = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
  }
  reg.smin_ = 0.0;
  if (reg.dim() <= kDeskScaleLimit) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(c, Eigen::EigenvaluesOnly);
    reg.smin_ = std::sqrt(std::max(eig.eigenvalues()(0), 0.0));
  }
  reg.gram_ = std::move(c);
  return reg;
}

Matrix Regularizer::gram(std::size_t n) const {
  if (identity_) return Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  require(dim() == n, "regularizer dimension mismatch");
  return gram_;
}

Vector Regularizer::apply_gram(const Vector& x) const {
  if (identity_) return x;
  require(static_cast<std::size_t>(x.size()) == dim(), "regularizer dimension mismatch");
  return gram_ * x;
}

double Regularizer::condition_estimate() const {
  if (identity_) return 1.0;
  Eigen::BDCSVD<Matrix> svd(factor_);
  const auto& sv = svd.singularValues();
  const double smallest = sv(sv.size() - 1);
  return smallest > 0.0 ? sv(0) / smallest : std::numeric_limits<double>::infinity();
}

BlockStack::BlockStack(std::vector<const Matrix*> blocks) {
  for (const Matrix* b : blocks) blocks_.push_back(Entry{b, nullptr});
  finish();
}

BlockStack::BlockStack(const std::vector<const SampleBlock*>& blocks) {
  for (const SampleBlock* b : blocks) {
    blocks_.push_back(b->has_sparse() ? Entry{nullptr, &b->sparse} : Entry{&b->a, nullptr});
  }
  finish();
}

std::size_t BlockStack::rows_of(const Entry& e) {
  return static_cast<std::size_t>(e.dense ? e.dense->rows() : e.sparse->rows());
}

void BlockStack::finish() {
  require(!blocks_.empty(), "block stack must contain the current block");
  auto cols_of = [](const Entry& e) { return static_cast<std::size_t>(e.dense ? e.dense->cols() : e.sparse->cols()); };
  cols_ = cols_of(blocks_.front());
  for (const Entry& e : blocks_) {
    require(cols_of(e) == cols_, "stacked blocks disagree on column count");
    rows_ += rows_of(e);
  }
}

Vector BlockStack::apply(const Vector& s) const {
  Vector out(static_cast<Eigen::Index>(rows_));
  Eigen::Index offset = 0;
  for (const Entry& e : blocks_) {
    const auto l = static_cast<Eigen::Index>(rows_of(e));
    if (e.dense) {
      out.segment(offset, l).noalias() = (*e.dense) * s;
    } else {
      out.segment(offset, l) = (*e.sparse) * s;
    }
    offset += l;
  }
  return out;
}

Vector BlockStack::apply_adjoint(const Vector& u) const {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(cols_));
  Eigen::Index offset = 0;
  for (const Entry& e : blocks_) {
    const auto l = static_cast<Eigen::Index>(rows_of(e));
    if (e.dense) {
      out.noalias() += e.dense->transpose() * u.segment(offset, l);
    } else {
      out += e.sparse->transpose() * u.segment(offset, l);
    }
    offset += l;
  }
  return out;
}

Vector BlockStack::current_adjoint(const Vector& u) const {
  const Entry& e = blocks_.back();
  if (e.dense) return e.dense->transpose() * u;
  return e.sparse->transpose() * u;
}

Matrix BlockStack::gram() const {
  const auto n = static_cast<Eigen::Index>(cols_);
  Matrix g = Matrix::Zero(n, n);
  for (const Entry& e : blocks_) {
    if (e.dense) {
      g.selfadjointView<Eigen::Lower>().rankUpdate(e.dense->transpose());
    } else {
      const Matrix d(*e.sparse);
      g.selfadjointView<Eigen::Lower>().rankUpdate(d.transpose());
    }
  }
  return g.selfadjointView<Eigen::Lower>();
}

namespace {

struct LsqrOutcome {
  Vector x;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> history;
};

// Paige-Saunders LSQR for min ||A x - b||^2 + damp^2 ||x||^2 starting from
// zero. Convergence: ||A^T r_k|| <= tol * ||A^T b||, using the recurrence
// estimate ||A^T r_k|| = alpha_{k+1} |s_k phi_k|. Given smin2 > 0, a lower
// bound on sigma_min(A)^2 (plus damp^2), it also requires the forward error
// bound ||A^T r_k|| / smin2 <= tol ||x_k||.
template <class Apply, class Adjoint>
LsqrOutcome lsqr(const Apply& apply, const Adjoint& adjoint, const Vector& b, Eigen::Index n,
                 double damp, double tol, std::size_t max_iter, bool track, double smin2 = 0.0) {
  LsqrOutcome out;
  out.x = Vector::Zero(n);

  Vector u = b;
  double beta = u.norm();
  if (beta == 0.0) {
    out.converged = true;
    return out;
  }
  u /= beta;
  Vector v = adjoint(u);
  double alpha = v.norm();
  if (alpha == 0.0) {
    out.converged = true;
    return out;
  }
  v /= alpha;
  Vector w = v;

  const double arnorm0 = alpha * beta;
  double rhobar = alpha;
  double phibar = beta;
  double damped_res2 = 0.0;
  const double damp2 = damp * damp;

  for (std::size_t itn = 1; itn <= max_iter; ++itn) {
    out.iterations = itn;
    u = apply(v) - alpha * u;
    beta = u.norm();
    if (beta > 0.0) {
      u /= beta;
      v = adjoint(u) - beta * v;
      alpha = v.norm();
      if (alpha > 0.0) v /= alpha;
    }

    double cs1 = 1.0, psi = 0.0, rhobar1 = rhobar;
    if (damp > 0.0) {
      rhobar1 = std::sqrt(rhobar * rhobar + damp2);
      cs1 = rhobar / rhobar1;
      const double sn1 = damp / rhobar1;
      psi = sn1 * phibar;
      phibar = cs1 * phibar;
    }

    const double rho = std::hypot(rhobar1, beta);
    const double cs = rhobar1 / rho;
    const double sn = beta / rho;
    const double theta = sn * alpha;
    rhobar = -cs * alpha;
    const double phi = cs * phibar;
    phibar = sn * phibar;
    const double tau = sn * phi;

    out.x += (phi / rho) * w;
    w = v - (theta / rho) * w;

    damped_res2 += psi * psi;
    if (track) out.history.push_back(std::sqrt(phibar * phibar + damped_res2));

    const double arnorm = alpha * std::abs(tau);
    if (beta == 0.0 || alpha == 0.0) {
      out.converged = true;
      break;
    }
    if (arnorm <= tol * arnorm0) {
      out.converged = true;
      if (smin2 <= 0.0 || arnorm <= tol * smin2 * out.x.norm()) break;
    } else {
      out.converged = false;
    }
  }
  return out;
}

std::size_t resolve_max_iterations(const LsqrOptions& opts, Eigen::Index n) {
  return opts.max_iterations > 0 ? opts.max_iterations : static_cast<std::size_t>(2 * n);
}

void validate(const BlockStack& stack, const Vector& residual, double kappa, const Regularizer& reg,
              const Vector& reg_rhs) {
  require(stack.size() > 0, "block stack is empty");
  require(kappa > 0.0 && std::isfinite(kappa), "damping parameter alpha must be positive and finite");
  require(static_cast<std::size_t>(residual.size()) == stack.current_rows(), "residual length must match current block rows");
  require(reg.is_identity() || reg.dim() == stack.cols(), "regularizer dimension mismatch");
  require(reg_rhs.size() == 0 || static_cast<std::size_t>(reg_rhs.size()) == stack.cols(),
          "regularization right-hand side has wrong length");
}

// A_k^T r + kappa L^T t.
Vector normal_rhs(const BlockStack& stack, const Vector& residual, double kappa,
                  const Regularizer& reg, const Vector& reg_rhs) {
  Vector rhs = stack.current_adjoint(residual);
  if (reg_rhs.size() > 0) {
    if (reg.is_identity()) {
      rhs += kappa * reg_rhs;
    } else {
      rhs.noalias() += kappa * (reg.factor().transpose() * reg_rhs);
    }
  }
  return rhs;
}

double normal_residual(const BlockStack& stack, const Vector& residual, double kappa,
                       const Regularizer& reg, const Vector& reg_rhs, const Vector& step) {
  const Vector rhs = normal_rhs(stack, residual, kappa, reg, reg_rhs);
  const Vector lhs = kappa * kappa * reg.apply_gram(step) + stack.apply_adjoint(stack.apply(step));
  const double rhs_norm = rhs.norm();
  return rhs_norm > 0.0 ? (lhs - rhs).norm() / rhs_norm : lhs.norm();
}

}  // namespace

double relative_normal_residual(const BlockStack& stack, const Vector& residual, double alpha,
                                const Regularizer& reg, const Vector& step) {
  return normal_residual(stack, residual, 1.0 / std::sqrt(alpha), reg, Vector(), step);
}

InnerSolveResult lsqr_regularized(const BlockStack& stack, const Vector& residual, double kappa,
                                  const Regularizer& reg, const Vector& reg_rhs,
                                  const LsqrOptions& opts) {
  validate(stack, residual, kappa, reg, reg_rhs);
  require(opts.rel_tolerance > 0.0, "LSQR tolerance must be positive");
  const auto n = static_cast<Eigen::Index>(stack.cols());
  InnerSolveResult result;
  const bool has_reg_rhs = reg_rhs.size() > 0 && !reg_rhs.isZero(0.0);
  if (residual.isZero(0.0) && !has_reg_rhs) {
    result.step = Vector::Zero(n);
    return result;
  }

  const auto stack_rows = static_cast<Eigen::Index>(stack.rows());
  const auto current_rows = static_cast<Eigen::Index>(stack.current_rows());
  const std::size_t max_iter = resolve_max_iterations(opts, n);
  const bool warm = !opts.min_norm_mode && opts.initial_guess.has_value();
  if (warm) require(opts.initial_guess->size() == n, "initial guess has wrong length");

  LsqrOutcome outcome;
  if (reg.is_identity() && !has_reg_rhs && !warm) {
    // Fast path: kappa * I handled as LSQR damping.
    Vector rhs = Vector::Zero(stack_rows);
    rhs.tail(current_rows) = residual;
    auto apply = [&](const Vector& s) { return stack.apply(s); };
    auto adjoint = [&](const Vector& y) { return stack.apply_adjoint(y); };
    outcome = lsqr(apply, adjoint, rhs, n, kappa, opts.rel_tolerance, max_iter, opts.track_history,
                   kappa * kappa);
  } else {
    const Matrix& l = reg.factor();
    const bool identity = reg.is_identity();
    Vector aug = Vector::Zero(stack_rows + n);
    aug.segment(stack_rows - current_rows, current_rows) = residual;
    if (has_reg_rhs) aug.tail(n) = reg_rhs;
    auto apply = [&](const Vector& s) {
      Vector y(stack_rows + n);
      y.head(stack_rows) = stack.apply(s);
      if (identity) {
        y.tail(n) = kappa * s;
      } else {
        y.tail(n).noalias() = kappa * (l * s);
      }
      return y;
    };
    auto adjoint = [&](const Vector& y) {
      Vector x = stack.apply_adjoint(y.head(stack_rows));
      if (identity) {
        x += kappa * y.tail(n);
      } else {
        x.noalias() += kappa * (l.transpose() * y.tail(n));
      }
      return x;
    };
    const double smin = identity ? 1.0 : reg.min_singular_value();
    const double smin2 = kappa * kappa * smin * smin;
    if (warm) {
      const Vector& start = *opts.initial_guess;
      aug -= apply(start);
      outcome = lsqr(apply, adjoint, aug, n, 0.0, opts.rel_tolerance, max_iter, opts.track_history, smin2);
      outcome.x += start;
    } else {
      outcome = lsqr(apply, adjoint, aug, n, 0.0, opts.rel_tolerance, max_iter, opts.track_history, smin2);
    }
  }

  result.step = std::move(outcome.x);
  result.iterations = outcome.iterations;
  result.converged = outcome.converged;
  result.residual_history = std::move(outcome.history);
  result.rel_normal_residual = normal_residual(stack, residual, kappa, reg, reg_rhs, result.step);
  return result;
}

InnerSolveResult lsqr_damped(const BlockStack& stack, const Vector& residual, double alpha,
                             const Regularizer& reg, const LsqrOptions& opts) {
  require(alpha > 0.0 && std::isfinite(alpha), "damping parameter alpha must be positive and finite");
  return lsqr_regularized(stack, residual, 1.0 / std::sqrt(alpha), reg, Vector(), opts);
}

Vector direct_regularized(const BlockStack& stack, const Vector& residual, double kappa,
                          const Regularizer& reg, const Vector& reg_rhs) {
  validate(stack, residual, kappa, reg, reg_rhs);
  Matrix h = stack.gram();
  if (reg.is_identity()) {
    h.diagonal().array() += kappa * kappa;
  } else {
    h += (kappa * kappa) * reg.gram(stack.cols());
  }
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success) {
    throw SingularSystem("normal-equation matrix of the damped step is not positive definite");
  }
  return llt.solve(normal_rhs(stack, residual, kappa, reg, reg_rhs));
}

Vector direct_step(const BlockStack& stack, const Vector& residual, double alpha,
                   const Regularizer& reg) {
  require(alpha > 0.0 && std::isfinite(alpha), "damping parameter alpha must be positive and finite");
  return direct_regularized(stack, residual, 1.0 / std::sqrt(alpha), reg, Vector());
}

namespace {

template <class Op>
InnerSolveResult min_norm_solve(const Op& a, const Vector& rhs, const LsqrOptions& opts) {
  require(rhs.size() == a.rows(), "right-hand side length mismatch");
  auto apply = [&](const Vector& s) { return Vector(a * s); };
  auto adjoint = [&](const Vector& y) { return Vector(a.transpose() * y); };
  const std::size_t max_iter = resolve_max_iterations(opts, a.cols());
  LsqrOutcome outcome = lsqr(apply, adjoint, rhs, a.cols(), 0.0, opts.rel_tolerance, max_iter,
                             opts.track_history);
  InnerSolveResult result;
  result.step = std::move(outcome.x);
  result.iterations = outcome.iterations;
  result.converged = outcome.converged;
  result.residual_history = std::move(outcome.history);
  const Vector atb = a.transpose() * rhs;
  const double denom = atb.norm();
  const Vector atr = a.transpose() * Vector(rhs - a * result.step);
  result.rel_normal_residual = denom > 0.0 ? atr.norm() / denom : atr.norm();
  return result;
}

}  // namespace

InnerSolveResult lsqr_min_norm(const Matrix& a, const Vector& rhs, const LsqrOptions& opts) {
  return min_norm_solve(a, rhs, opts);
}

InnerSolveResult lsqr_min_norm(const SampleBlock& a, const Vector& rhs, const LsqrOptions& opts) {
  if (a.has_sparse()) return min_norm_solve(a.sparse, rhs, opts);
  return min_norm_solve(a.a, rhs, opts);
}

}  // namespace slim
