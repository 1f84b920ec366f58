#include "slim/analysis.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace slim {
namespace {

constexpr double kConditionLimit = 1e12;
constexpr double kZeroEigenvalue = 1e-12;  // relative to A_max
constexpr double kMomentWorkload = 1e9;    // k_max * n^2

void desk_guard(std::size_t n) {
  if (n > kDeskScaleLimit) {
    throw ScaleGuard("dense theory computation needs n <= " + std::to_string(kDeskScaleLimit) +
                     ", got " + std::to_string(n));
  }
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

}  // namespace

Vector ls_solution(const Matrix& a, const Vector& b) {
  require(a.rows() == b.size(), "ls_solution: rhs length does not match the row count");
  require(a.rows() >= a.cols() && a.cols() > 0, "ls_solution: need m >= n > 0");
  desk_guard(static_cast<std::size_t>(a.cols()));
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  if (!(smin > 0.0) || s(0) / smin > kConditionLimit) {
    throw SingularSystem("ls_solution: matrix is rank deficient (condition estimate " +
                         std::to_string(smin > 0.0 ? s(0) / smin : INFINITY) + ")");
  }
  return svd.solve(b);
}

Vector ls_solution(const RowBlockOperator& op) {
  desk_guard(op.n_cols());
  return ls_solution(op.dense_matrix(), op.rhs());
}

DeskModel::DeskModel(const RowBlockOperator& op) {
  desk_guard(op.n_cols());
  a_ = op.dense_matrix();
  b_ = op.rhs();

  Eigen::BDCSVD<Matrix> svd(a_, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  sigma_max_ = s(0);
  sigma_min_ = s(s.size() - 1);
  if (!(sigma_min_ > 0.0) || sigma_max_ / sigma_min_ > kConditionLimit) {
    throw SingularSystem("theory constants need a full-column-rank matrix");
  }
  x_ls_ = svd.solve(b_);

  blocks_.reserve(op.n_blocks());
  for (std::size_t i = 0; i < op.n_blocks(); ++i) {
    SampleBlock blk = op.fetch_block(i);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram_block(blk));
    blocks_.push_back(Block{blk.dense(), std::move(blk.b), eig.eigenvalues(),
                            eig.eigenvectors()});
  }
}

Matrix DeskModel::damped_inverse(const Block& blk, double alpha) const {
  Vector d = (1.0 + alpha * blk.eigenvalues.array().max(0.0)).inverse().matrix();
  return blk.eigenvectors * d.asDiagonal() * blk.eigenvectors.transpose();
}

TheoryConstants DeskModel::constants(double alpha) const {
  require(alpha > 0.0 && std::isfinite(alpha), "theory constants need alpha > 0");
  const auto n = static_cast<Eigen::Index>(n_cols());
  const double inv_m = 1.0 / static_cast<double>(n_blocks());

  TheoryConstants out;
  out.alpha = alpha;
  out.n_blocks = n_blocks();
  out.x_ls = x_ls_;

  Matrix e_inv = Matrix::Zero(n, n);
  Vector rhs = Vector::Zero(n);
  Vector rhs_proj = Vector::Zero(n);
  const Vector qab = b_ - a_ * x_ls_;
  out.qab_norm = qab.norm();

  std::vector<Matrix> inverses;
  inverses.reserve(blocks_.size());
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const Block& blk = blocks_[i];
    inverses.push_back(damped_inverse(blk, alpha));
    const Matrix& inv = inverses.back();
    e_inv += inv;
    const Eigen::Index l = blk.a.rows();
    rhs += alpha * (inv * (blk.a.transpose() * blk.b));
    rhs_proj += alpha * (inv * (blk.a.transpose() * qab.segment(static_cast<Eigen::Index>(i) * l, l)));
  }
  e_inv *= inv_m;
  rhs *= inv_m;
  rhs_proj *= inv_m;

  out.EBk_over_alpha = e_inv;
  out.B = Matrix::Identity(n, n) - e_inv;
  out.asymmetry_B = (out.B - out.B.transpose()).cwiseAbs().maxCoeff();

  Eigen::SelfAdjointEigenSolver<Matrix> eb(e_inv, Eigen::EigenvaluesOnly);
  out.rho = eb.eigenvalues().cwiseAbs().maxCoeff();
  Eigen::SelfAdjointEigenSolver<Matrix> bb(out.B, Eigen::EigenvaluesOnly);
  out.lambda_min_B = bb.eigenvalues()(0);
  out.lambda_max_B = bb.eigenvalues()(n - 1);

  Eigen::LLT<Matrix> llt(out.B);
  if (llt.info() != Eigen::Success) {
    throw SingularSystem("B is not positive definite");
  }
  out.x_hat = llt.solve(rhs);
  out.x_hat_projection = x_ls_ + llt.solve(rhs_proj);

  // Block Gram spectra.
  double a_max = 0.0;
  for (const Block& blk : blocks_) a_max = std::max(a_max, blk.eigenvalues(n - 1));
  const double zero = kZeroEigenvalue * a_max;
  double a_min = std::numeric_limits<double>::infinity();
  double smallest_positive = std::numeric_limits<double>::infinity();
  std::size_t m_zero = 0;
  for (const Block& blk : blocks_) {
    if (blk.eigenvalues(0) <= zero) {
      ++m_zero;
    } else {
      a_min = std::min(a_min, blk.eigenvalues(0));
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      if (blk.eigenvalues(j) > zero) {
        smallest_positive = std::min(smallest_positive, blk.eigenvalues(j));
        break;
      }
    }
  }
  out.a_max = a_max;
  out.m_zero = m_zero;
  out.a_min_fallback = m_zero == blocks_.size();
  out.a_min = out.a_min_fallback ? smallest_positive : a_min;

  out.c = out.lambda_min_B / (1.0 + alpha * a_max);

  double sigma = 0.0;
  double mean_block_norm = 0.0;
  double mean_gram_norm = 0.0;
  out.block_damped_gram_norm.reserve(blocks_.size());
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const Block& blk = blocks_[i];
    sigma += (blk.a.transpose() * (blk.a * out.x_hat - blk.b)).norm();
    const double lmax = std::max(blk.eigenvalues(n - 1), 0.0);
    mean_block_norm += std::sqrt(lmax);
    mean_gram_norm += lmax;
    const Matrix bg = alpha * (inverses[i] * (blk.a.transpose() * blk.a));
    out.block_damped_gram_norm.push_back(spectral_norm(bg));
  }
  out.sigma = sigma * inv_m;
  out.c_const = mean_block_norm * inv_m +
                (1.0 / (sigma_min_ * sigma_min_)) * sigma_max_ * mean_gram_norm * inv_m;

  const double m = static_cast<double>(n_blocks());
  out.bias_bound = alpha * m * (1.0 + alpha * out.a_min) * a_max /
                   ((1.0 + alpha * a_max) * out.a_min) * out.c_const * out.qab_norm;
  return out;
}

double DeskModel::stationarity_residual(double alpha, const Vector& x) const {
  require(x.size() == static_cast<Eigen::Index>(n_cols()), "stationarity_residual: size mismatch");
  Vector acc = Vector::Zero(x.size());
  for (const Block& blk : blocks_) {
    acc += alpha * (damped_inverse(blk, alpha) * (blk.a.transpose() * (blk.a * x - blk.b)));
  }
  return (acc / static_cast<double>(n_blocks())).norm();
}

MomentTrace DeskModel::moments(const TheoryConstants& constants, const Vector& x0,
                               std::size_t k_max) const {
  const auto n = static_cast<Eigen::Index>(n_cols());
  require(x0.size() == n, "moment recursion: x0 size mismatch");
  const double nn = static_cast<double>(n) * static_cast<double>(n);
  if (static_cast<double>(k_max) * nn > kMomentWorkload) {
    throw ScaleGuard("moment recursion workload k_max * n^2 exceeds 1e9");
  }
  const double alpha = constants.alpha;
  const double inv_m = 1.0 / static_cast<double>(n_blocks());

  std::vector<Matrix> p;
  std::vector<Vector> d;
  p.reserve(blocks_.size());
  d.reserve(blocks_.size());
  Matrix dd = Matrix::Zero(n, n);
  for (const Block& blk : blocks_) {
    const Matrix bi = alpha * damped_inverse(blk, alpha);
    p.push_back(Matrix::Identity(n, n) - bi * (blk.a.transpose() * blk.a));
    d.push_back(-bi * (blk.a.transpose() * (blk.a * constants.x_hat - blk.b)));
    dd.noalias() += d.back() * d.back().transpose();
  }
  dd *= inv_m;

  MomentTrace trace;
  trace.mean_gap.reserve(k_max + 1);
  trace.second_moment.reserve(k_max + 1);

  Vector mean = x0 - constants.x_hat;
  Matrix s = mean * mean.transpose();
  trace.mean_gap.push_back(mean.norm());
  trace.second_moment.push_back(mean.squaredNorm());

  Matrix next(n, n);
  Matrix tmp(n, n);
  for (std::size_t k = 1; k <= k_max; ++k) {
    next = dd;
    for (std::size_t i = 0; i < p.size(); ++i) {
      tmp.noalias() = p[i] * s;
      next.noalias() += inv_m * (tmp * p[i].transpose());
      const Vector pm = p[i] * mean;
      next.noalias() += inv_m * (pm * d[i].transpose() + d[i] * pm.transpose());
    }
    s.swap(next);
    mean = constants.EBk_over_alpha * mean;
    trace.mean_gap.push_back(mean.norm());
    trace.second_moment.push_back(s.trace());
  }
  return trace;
}

TheoryConstants theory_constants(const RowBlockOperator& op, double alpha) {
  return DeskModel(op).constants(alpha);
}

double stationarity_residual(const TheoryConstants& constants, const RowBlockOperator& op) {
  return DeskModel(op).stationarity_residual(constants.alpha, constants.x_hat);
}

MomentTrace moment_recursion(const RowBlockOperator& op, double alpha, const Vector& x0,
                             std::size_t k_max) {
  DeskModel model(op);
  return model.moments(model.constants(alpha), x0, k_max);
}

std::vector<InequalityCheck> contraction_checks(const TheoryConstants& t) {
  const double a = t.alpha;
  const double m = static_cast<double>(t.n_blocks);
  const double m0 = static_cast<double>(t.m_zero);
  std::vector<InequalityCheck> out;

  const double bound_i = m0 / m + (m - m0) / (m * (1.0 + a * t.a_min));
  out.push_back({"rho: rho < 1", t.rho, 1.0, t.rho < 1.0});
  out.push_back({"rho: rho <= rank bound", t.rho, bound_i, t.rho <= bound_i * (1.0 + 1e-12)});
  out.push_back({"rho: rank bound < 1", bound_i, 1.0, bound_i < 1.0});

  const double sym_tol = 1e-12 * std::max(1.0, t.B.cwiseAbs().maxCoeff());
  out.push_back({"B: symmetric", t.asymmetry_B, sym_tol, t.asymmetry_B <= sym_tol});
  out.push_back({"B: positive definite", 0.0, t.lambda_min_B, t.lambda_min_B > 0.0});

  // Attained with equality on the block realizing A_max.
  const double bound_iii = a * t.a_max / (1.0 + a * t.a_max);
  double worst = 0.0;
  for (double v : t.block_damped_gram_norm) worst = std::max(worst, v);
  out.push_back({"block: max ||B_k G_k|| <= alpha A_max/(1+alpha A_max)", worst, bound_iii,
                 worst <= bound_iii * (1.0 + 1e-12)});

  const double lower = a * t.a_min / (m * (1.0 + a * t.a_min));
  out.push_back({"spectrum: lower bound > 0", 0.0, lower, lower > 0.0});
  out.push_back({"spectrum: lower bound < lambda_min(B)", lower, t.lambda_min_B, lower < t.lambda_min_B});
  const double upper = (1.0 + a * t.a_max) / 2.0;
  out.push_back({"spectrum: lambda_max(B) < (1+alpha A_max)/2", t.lambda_max_B, upper,
                 t.lambda_max_B < upper});
  const double contraction = 1.0 - 2.0 * t.c;
  out.push_back({"step: 0 < 1 - 2c", 0.0, contraction, contraction > 0.0});
  out.push_back({"step: 1 - 2c < 1", contraction, 1.0, contraction < 1.0});
  return out;
}

InequalityCheck bias_bound_check(const TheoryConstants& t) {
  const double actual = (t.x_hat - t.x_ls).norm();
  return {"||x_hat - x_ls|| <= bias bound", actual, t.bias_bound,
          actual <= t.bias_bound * (1.0 + 1e-12) + 1e-14 * t.x_ls.norm()};
}

std::vector<InequalityCheck> moment_checks(const TheoryConstants& t, const MomentTrace& trace,
                                            const Vector& x0, double rel_slack) {
  const double e0 = (x0 - t.x_hat).norm();
  const double horizon = t.alpha * t.alpha * t.sigma * t.sigma / t.c;
  const double q = 1.0 - 2.0 * t.c;

  // Report the tightest k as lhs/rhs of the worst ratio.
  InequalityCheck mean{"mean gap <= rho^k ||x0 - x_hat||", 0.0, 0.0, true};
  double worst_mean = -1.0;
  for (std::size_t k = 0; k < trace.mean_gap.size(); ++k) {
    const double rhs = std::pow(t.rho, static_cast<double>(k)) * e0;
    const double lhs = trace.mean_gap[k];
    const bool ok = lhs <= rhs * (1.0 + rel_slack);
    mean.holds = mean.holds && ok;
    const double ratio = rhs > 0.0 ? lhs / rhs : (lhs > 0.0 ? INFINITY : 0.0);
    if (ratio > worst_mean) {
      worst_mean = ratio;
      mean.lhs = lhs;
      mean.rhs = rhs;
    }
  }

  InequalityCheck second{"second moment <= (1-2c)^k e0^2 + alpha^2 sigma^2 / c", 0.0, 0.0, true};
  double worst_second = -1.0;
  for (std::size_t k = 0; k < trace.second_moment.size(); ++k) {
    const double rhs = std::pow(q, static_cast<double>(k)) * e0 * e0 + horizon * (1.0 + rel_slack);
    const double lhs = trace.second_moment[k];
    const bool ok = lhs <= rhs * (1.0 + 1e-14);
    second.holds = second.holds && ok;
    const double ratio = rhs > 0.0 ? lhs / rhs : (lhs > 0.0 ? INFINITY : 0.0);
    if (ratio > worst_second) {
      worst_second = ratio;
      second.lhs = lhs;
      second.rhs = rhs;
    }
  }
  return {mean, second};
}

void write_theory_report(std::ostream& out, const TheoryConstants& t,
                         const std::vector<InequalityCheck>& checks, bool header) {
  const auto old_precision = out.precision(17);
  if (header) out << "alpha,item,lhs,rhs,holds\n";
  auto value = [&](const char* name, double v) {
    out << t.alpha << ',' << name << ',' << v << ",,\n";
  };
  value("rho", t.rho);
  value("lambda_min_B", t.lambda_min_B);
  value("lambda_max_B", t.lambda_max_B);
  value("A_min", t.a_min);
  value("A_max", t.a_max);
  value("M_zero", static_cast<double>(t.m_zero));
  value("A_min_fallback", t.a_min_fallback ? 1.0 : 0.0);
  value("c", t.c);
  value("sigma", t.sigma);
  value("C", t.c_const);
  value("norm_QAb", t.qab_norm);
  value("bias_bound", t.bias_bound);
  value("norm_xhat_minus_xls", (t.x_hat - t.x_ls).norm());
  value("horizon", t.alpha * t.alpha * t.sigma * t.sigma / t.c);
  for (const InequalityCheck& c : checks) {
    out << t.alpha << ",\"" << c.name << "\"," << c.lhs << ',' << c.rhs << ','
        << (c.holds ? "pass" : "fail") << '\n';
  }
  out.precision(old_precision);
}

}  // namespace slim
