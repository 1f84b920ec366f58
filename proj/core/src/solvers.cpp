#include "slim/solvers.hpp"

#include <chrono>
#include <cmath>
#include <string>

namespace slim {

Method parse_method(std::string_view name) {
  if (name == "slimls") return Method::slimls;
  if (name == "sg") return Method::sg;
  if (name == "kaczmarz") return Method::kaczmarz;
  if (name == "block_kaczmarz") return Method::block_kaczmarz;
  if (name == "damped_block_kaczmarz") return Method::damped_block_kaczmarz;
  if (name == "recursive_ls") return Method::recursive_ls;
  if (name == "olbfgs") return Method::olbfgs;
  if (name == "slimtik") return Method::slimtik;
  throw InvalidArgument("unknown method '" + std::string(name) + "'");
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::slimls: return "slimls";
    case Method::sg: return "sg";
    case Method::kaczmarz: return "kaczmarz";
    case Method::block_kaczmarz: return "block_kaczmarz";
    case Method::damped_block_kaczmarz: return "damped_block_kaczmarz";
    case Method::recursive_ls: return "recursive_ls";
    case Method::olbfgs: return "olbfgs";
    case Method::slimtik: return "slimtik";
  }
  return "?";
}

InnerMethod parse_inner_method(std::string_view name) {
  if (name == "lsqr") return InnerMethod::lsqr;
  if (name == "direct") return InnerMethod::direct;
  throw InvalidArgument("unknown inner solver '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------

Schedule::Schedule(Kind kind, double alpha, std::size_t ramp_length, double exponent)
    : kind_(kind), alpha_(alpha), ramp_length_(ramp_length), exponent_(exponent) {
  require(alpha > 0.0 && std::isfinite(alpha), "schedule base alpha must be positive and finite");
}

Schedule Schedule::constant(double alpha) { return Schedule(Kind::constant, alpha, 1, 0.0); }

Schedule Schedule::ramp(double alpha, std::size_t ramp_length) {
  require(ramp_length >= 1, "ramp length must be at least 1");
  return Schedule(Kind::ramp, alpha, ramp_length, 0.0);
}

Schedule Schedule::decay(double alpha, double exponent) {
  require(exponent >= 0.0, "decay exponent must be non-negative");
  return Schedule(Kind::decay, alpha, 1, exponent);
}

double Schedule::alpha(std::size_t k) const {
  require(k >= 1, "schedule is indexed from k = 1");
  switch (kind_) {
    case Kind::constant:
      return alpha_;
    case Kind::ramp:
      if (k <= ramp_length_) return static_cast<double>(k) * alpha_ / static_cast<double>(ramp_length_);
      return alpha_;
    case Kind::decay:
      return alpha_ / std::pow(static_cast<double>(k), exponent_);
  }
  return alpha_;
}

// ---------------------------------------------------------------------------

MemoryBuffer::MemoryBuffer(std::size_t capacity) : capacity_(capacity) {
  require(capacity >= 1, "memory buffer must hold at least the current block");
}

void MemoryBuffer::push(SampleBlock blk) {
  if (!entries_.empty()) {
    require(blk.cols() == entries_.back().cols(), "block column count changed between samples");
  }
  entries_.push_back(std::move(blk));
  while (entries_.size() > capacity_) entries_.pop_front();
}

BlockStack MemoryBuffer::stack() const {
  std::vector<const SampleBlock*> blocks;
  blocks.reserve(entries_.size());
  for (const auto& e : entries_) blocks.push_back(&e);
  return BlockStack(blocks);
}

// ---------------------------------------------------------------------------

SolverState make_state(const SolverOptions& options, std::size_t n, std::optional<Vector> x0) {
  require(n > 0, "problem must have at least one unknown");
  const bool windowed = options.method == Method::slimls || options.method == Method::slimtik;
  SolverState state{.x = Vector::Zero(static_cast<Eigen::Index>(n)),
                    .x0 = Vector(),
                    .k = 0,
                    .buffer = MemoryBuffer(windowed ? options.memory + 1 : 1),
                    .gram_sum = Matrix(),
                    .pairs = {}};
  if (x0) {
    require(static_cast<std::size_t>(x0->size()) == n, "initial guess has wrong length");
    state.x = *x0;
  }
  state.x0 = state.x;
  if (options.method == Method::recursive_ls) {
    if (n > kDeskScaleLimit) {
      throw ScaleGuard("recursive LS accumulates a dense n x n Gram matrix; n = " +
                       std::to_string(n) + " exceeds the desk-scale limit");
    }
    require(state.x.isZero(0.0), "recursive LS requires x0 = 0");
    state.gram_sum = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  }
  return state;
}

namespace {

void check_block(const SolverState& state, const SampleBlock& blk) {
  require(blk.rows() == static_cast<std::size_t>(blk.b.size()), "sample block rows and rhs length disagree");
  require(blk.cols() == static_cast<std::size_t>(state.x.size()), "sample block column count does not match the iterate");
}

void finish_step(SolverState& state, double alpha) {
  ++state.k;
  state.last_alpha = alpha;
  const double limit = 1e12 * (1.0 + state.x0.norm());
  if (!state.x.allFinite() || state.x.norm() > limit) {
    throw DivergenceError("iterate diverged at k = " + std::to_string(state.k));
  }
}

// r = A_k x - b_k for the newest block.
Vector sampled_residual(SolverState& state) {
  const SampleBlock& blk = state.buffer.newest();
  Vector r = blk.times(state.x) - blk.b;
  state.last_sampled_residual = r.norm();
  return r;
}

void record_inner(SolverState& state, const InnerSolveResult& res) {
  state.last_inner_iterations = res.iterations;
  state.last_inner_converged = res.converged;
}

}  // namespace

void slimls_step(SolverState& state, SampleBlock blk, double alpha, const Regularizer& reg,
                 InnerMethod inner, const LsqrOptions& lsqr) {
  check_block(state, blk);
  require(alpha > 0.0, "damping parameter must be positive");
  state.buffer.push(std::move(blk));
  const Vector r = sampled_residual(state);
  const BlockStack stack = state.buffer.stack();
  if (inner == InnerMethod::direct) {
    state.x -= direct_step(stack, r, alpha, reg);
    state.last_inner_iterations = 0;
    state.last_inner_converged = true;
  } else {
    const InnerSolveResult res = lsqr_damped(stack, r, alpha, reg, lsqr);
    record_inner(state, res);
    state.x -= res.step;
  }
  finish_step(state, alpha);
}

void sg_step(SolverState& state, SampleBlock blk, double alpha) {
  check_block(state, blk);
  state.buffer.push(std::move(blk));
  const Vector r = sampled_residual(state);
  state.x -= alpha * state.buffer.newest().transpose_times(r);
  finish_step(state, alpha);
}

void kaczmarz_update(Vector& x, const Eigen::Ref<const Eigen::RowVectorXd>& row, double rhs,
                     double alpha) {
  const double norm2 = row.squaredNorm();
  if (norm2 == 0.0) throw InvalidArgument("Kaczmarz step on a zero row");
  const double scale = alpha * (row.dot(x) - rhs) / norm2;
  x -= scale * row.transpose();
}

void kaczmarz_step(SolverState& state, SampleBlock blk, double alpha) {
  check_block(state, blk);
  require(blk.rows() == 1, "Kaczmarz step expects a single-row block");
  state.buffer.push(std::move(blk));
  const SampleBlock& cur = state.buffer.newest();
  const Matrix& a = cur.dense();
  state.last_sampled_residual = std::abs(a.row(0).dot(state.x) - cur.b(0));
  kaczmarz_update(state.x, a.row(0), cur.b(0), alpha);
  finish_step(state, alpha);
}

void block_kaczmarz_step(SolverState& state, SampleBlock blk, double alpha, const LsqrOptions& lsqr) {
  check_block(state, blk);
  if (blk.rows() == 1) {
    // a^+ = a^T / ||a||^2
    kaczmarz_step(state, std::move(blk), alpha);
    return;
  }
  const bool zero = blk.has_sparse() ? Vector(Eigen::Map<const Vector>(blk.sparse.valuePtr(), blk.sparse.nonZeros())).isZero(0.0)
                                     : blk.a.isZero(0.0);
  require(!zero, "block Kaczmarz step on an all-zero block");
  state.buffer.push(std::move(blk));
  const Vector r = sampled_residual(state);
  const InnerSolveResult res = lsqr_min_norm(state.buffer.newest(), r, lsqr);
  record_inner(state, res);
  state.x -= alpha * res.step;
  finish_step(state, alpha);
}

void damped_block_kaczmarz_step(SolverState& state, SampleBlock blk, double alpha,
                                InnerMethod inner, const LsqrOptions& lsqr) {
  // The r = 0, C = I member of the limited-memory family.
  require(state.buffer.capacity() == 1, "damped block Kaczmarz keeps only the current block");
  slimls_step(state, std::move(blk), alpha, Regularizer::identity(), inner, lsqr);
}

void recursive_ls_step(SolverState& state, SampleBlock blk, double pinv_cutoff) {
  check_block(state, blk);
  require(state.gram_sum.rows() == state.x.size(), "state was not prepared for recursive LS");
  state.buffer.push(std::move(blk));
  const SampleBlock& cur = state.buffer.newest();
  state.gram_sum += gram_block(cur);
  const Vector r = sampled_residual(state);
  const Vector g = cur.transpose_times(r);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(state.gram_sum);
  const Vector& lambda = eig.eigenvalues();
  const double cutoff = pinv_cutoff * std::max(lambda.maxCoeff(), 0.0);
  Vector coeff = eig.eigenvectors().transpose() * g;
  for (Eigen::Index i = 0; i < coeff.size(); ++i) {
    coeff(i) = lambda(i) > cutoff ? coeff(i) / lambda(i) : 0.0;
  }
  state.x.noalias() -= eig.eigenvectors() * coeff;
  finish_step(state, 1.0);
}

Vector lbfgs_direction(const std::deque<CurvaturePair>& pairs, const Vector& gradient) {
  Vector q = gradient;
  std::vector<double> a(pairs.size());
  std::vector<double> rho(pairs.size());
  for (std::size_t j = pairs.size(); j-- > 0;) {
    rho[j] = 1.0 / pairs[j].y.dot(pairs[j].s);
    a[j] = rho[j] * pairs[j].s.dot(q);
    q -= a[j] * pairs[j].y;
  }
  Vector r = q;  // H_0 = I
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    const double beta = rho[j] * pairs[j].y.dot(r);
    r += (a[j] - beta) * pairs[j].s;
  }
  return r;
}

void olbfgs_step(SolverState& state, SampleBlock blk, double alpha, std::size_t memory,
                 double curvature_threshold) {
  check_block(state, blk);
  state.buffer.push(std::move(blk));
  const SampleBlock& cur = state.buffer.newest();
  const Vector r = sampled_residual(state);
  const Vector g = cur.transpose_times(r);
  if (g.isZero(0.0)) {
    finish_step(state, alpha);
    return;
  }
  const Vector s = -alpha * lbfgs_direction(state.pairs, g);
  state.x += s;
  // Curvature of the sampled quadratic: y = A_k^T A_k s.
  Vector y = cur.transpose_times(cur.times(s));
  if (memory > 0 && s.dot(y) > curvature_threshold * s.norm() * y.norm()) {
    state.pairs.push_back(CurvaturePair{s, std::move(y)});
    while (state.pairs.size() > memory) state.pairs.pop_front();
  } else if (memory > 0) {
    ++state.rejected_pairs;
  }
  finish_step(state, alpha);
}

void slimtik_step(SolverState& state, SampleBlock blk, double alpha, const Regularizer& reg,
                  double lambda, std::size_t n_blocks, InnerMethod inner, const LsqrOptions& lsqr) {
  check_block(state, blk);
  require(alpha > 0.0, "damping parameter must be positive");
  require(lambda >= 0.0, "regularization parameter must be non-negative");
  require(n_blocks >= 1, "block count M must be positive");
  state.buffer.push(std::move(blk));
  const Vector r = sampled_residual(state);
  const BlockStack stack = state.buffer.stack();

  const double weight = lambda * lambda / static_cast<double>(n_blocks);
  const double stacked = static_cast<double>(state.buffer.size());
  const double kappa = std::sqrt(1.0 / alpha + stacked * weight);
  // kappa L^T t = (lambda^2/M) L^T L x
  Vector t;
  if (weight > 0.0) {
    t = reg.is_identity() ? Vector(state.x) : Vector(reg.factor() * state.x);
    t *= weight / kappa;
  }
  if (inner == InnerMethod::direct) {
    state.x -= direct_regularized(stack, r, kappa, reg, t);
    state.last_inner_iterations = 0;
    state.last_inner_converged = true;
  } else {
    const InnerSolveResult res = lsqr_regularized(stack, r, kappa, reg, t, lsqr);
    record_inner(state, res);
    state.x -= res.step;
  }
  finish_step(state, alpha);
}

void step(SolverState& state, SampleBlock blk, const SolverOptions& options) {
  const double alpha = options.schedule.alpha(state.k + 1);
  switch (options.method) {
    case Method::slimls:
      slimls_step(state, std::move(blk), alpha, options.regularizer, options.inner, options.lsqr);
      break;
    case Method::sg:
      sg_step(state, std::move(blk), alpha);
      break;
    case Method::kaczmarz:
      kaczmarz_step(state, std::move(blk), alpha);
      break;
    case Method::block_kaczmarz:
      block_kaczmarz_step(state, std::move(blk), alpha, options.lsqr);
      break;
    case Method::damped_block_kaczmarz:
      damped_block_kaczmarz_step(state, std::move(blk), alpha, options.inner, options.lsqr);
      break;
    case Method::recursive_ls:
      recursive_ls_step(state, std::move(blk), options.pinv_cutoff);
      break;
    case Method::olbfgs:
      olbfgs_step(state, std::move(blk), alpha, options.lbfgs_memory, options.curvature_threshold);
      break;
    case Method::slimtik:
      slimtik_step(state, std::move(blk), alpha, options.regularizer, options.lambda,
                   options.n_blocks, options.inner, options.lsqr);
      break;
  }
}

// ---------------------------------------------------------------------------

std::size_t iteration_count(double epochs, std::size_t n_blocks) {
  require(epochs >= 0.0 && std::isfinite(epochs), "epochs must be non-negative");
  return static_cast<std::size_t>(std::llround(epochs * static_cast<double>(n_blocks)));
}

Trajectory run(const SolverOptions& options, const RowBlockOperator& op, Sampler& sampler,
               const RunOptions& run_options) {
  require(sampler.n_blocks() == op.n_blocks(), "sampler and operator disagree on block count");
  const std::size_t total = iteration_count(run_options.epochs, op.n_blocks());
  if (op.access_mode() == AccessMode::single_pass) {
    if (sampler.scheme() != SamplingScheme::cyclic) {
      throw StreamError("single-pass operators require cyclic sampling");
    }
    if (total > op.n_blocks()) throw StreamError("single-pass operators allow at most one pass");
  }
  if (options.method == Method::kaczmarz) {
    require(op.block_rows() == 1, "Kaczmarz needs single-row blocks");
  }

  SolverState state = make_state(options, op.n_cols(), run_options.x0);
  Trajectory traj;
  traj.steps.reserve(total);
  if (run_options.keep_iterates) traj.iterates.push_back(state.x);
  if (run_options.observer) run_options.observer(state, nullptr);

  using clock = std::chrono::steady_clock;
  for (std::size_t it = 0; it < total; ++it) {
    const auto start = clock::now();
    const std::size_t index = sampler.next_index();
    StepRecord rec;
    rec.block_index = index;
    try {
      step(state, op.fetch_block(index), options);
    } catch (const DivergenceError& e) {
      traj.status = RunStatus::diverged;
      traj.message = e.what();
      rec.k = state.k;
      rec.alpha = state.last_alpha;
      rec.sampled_residual_norm = state.last_sampled_residual;
      rec.wall_time_seconds = std::chrono::duration<double>(clock::now() - start).count();
      traj.steps.push_back(rec);
      break;
    }
    rec.k = state.k;
    rec.alpha = state.last_alpha;
    rec.sampled_residual_norm = state.last_sampled_residual;
    rec.wall_time_seconds = std::chrono::duration<double>(clock::now() - start).count();
    traj.steps.push_back(rec);
    if (run_options.keep_iterates) traj.iterates.push_back(state.x);
    if (run_options.observer) run_options.observer(state, &traj.steps.back());
  }
  traj.final_x = state.x;
  return traj;
}

}  // namespace slim
