#pragma once

#include "slim/innersolve.hpp"
#include "slim/linops.hpp"
#include "slim/sampling.hpp"

#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace slim {

enum class Method {
  slimls,
  sg,
  kaczmarz,
  block_kaczmarz,
  damped_block_kaczmarz,
  recursive_ls,
  olbfgs,
  slimtik,
};

Method parse_method(std::string_view name);
std::string_view to_string(Method method);

// Damping / step-size sequence alpha_k, k = 1, 2, ...
//
//   constant  alpha_k = alpha
//   ramp      alpha_k = k alpha / L for k <= L, then alpha   (L = r + 1)
//   decay     alpha_k = alpha / k^p
class Schedule {
 public:
  enum class Kind { constant, ramp, decay };

  static Schedule constant(double alpha);
  static Schedule ramp(double alpha, std::size_t ramp_length);
  static Schedule decay(double alpha, double exponent = 1.0);

  double alpha(std::size_t k) const;

  Kind kind() const { return kind_; }
  double base_alpha() const { return alpha_; }
  std::size_t ramp_length() const { return ramp_length_; }
  double decay_exponent() const { return exponent_; }

 private:
  Schedule(Kind kind, double alpha, std::size_t ramp_length, double exponent);

  Kind kind_;
  double alpha_;
  std::size_t ramp_length_;
  double exponent_;
};

// Sliding window of the last r+1 sampled blocks, oldest first. This is the
// only place a solver keeps block data; it persists across epoch boundaries.
class MemoryBuffer {
 public:
  explicit MemoryBuffer(std::size_t capacity = 1);

  void push(SampleBlock blk);
  void clear() { entries_.clear(); }

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }
  const SampleBlock& newest() const { return entries_.back(); }
  const std::deque<SampleBlock>& entries() const { return entries_; }

  // [A_{k-r}; ...; A_k] over the buffered blocks.
  BlockStack stack() const;

 private:
  std::size_t capacity_;
  std::deque<SampleBlock> entries_;
};

enum class InnerMethod { lsqr, direct };

InnerMethod parse_inner_method(std::string_view name);

struct SolverOptions {
  Method method = Method::slimls;
  Schedule schedule = Schedule::constant(1.0);
  // Memory level r: M_k stacks the last r+1 blocks.
  std::size_t memory = 0;
  Regularizer regularizer = Regularizer::identity();
  // slimTik: Tikhonov parameter and the block count M in lambda^2 / M.
  double lambda = 0.0;
  std::size_t n_blocks = 1;
  // olbfgs: number of stored curvature pairs; a pair is accepted only if
  // s^T y > curvature_threshold * ||s|| ||y||.
  std::size_t lbfgs_memory = 10;
  double curvature_threshold = 1e-12;
  // recursive LS: eigenvalues below cutoff * lambda_max count as zero.
  double pinv_cutoff = 1e-12;
  InnerMethod inner = InnerMethod::lsqr;
  LsqrOptions lsqr;
};

struct CurvaturePair {
  Vector s;
  Vector y;
};

struct SolverState {
  Vector x;
  Vector x0;
  std::size_t k = 0;
  MemoryBuffer buffer;

  // Diagnostics of the most recent step.
  double last_alpha = 0.0;
  double last_sampled_residual = 0.0;
  std::size_t last_inner_iterations = 0;
  bool last_inner_converged = true;

  // recursive LS: accumulated sum_i A_i^T A_i.
  Matrix gram_sum;
  // olbfgs: curvature pairs, oldest first.
  std::deque<CurvaturePair> pairs;
  std::size_t rejected_pairs = 0;
};

// Fresh state for `options`, starting from x0 (zero if empty). The buffer
// capacity is r+1 for slimLS/slimTik and 1 for every other method.
SolverState make_state(const SolverOptions& options, std::size_t n, std::optional<Vector> x0 = {});

// Individual iterations. Each pushes `blk` into the memory buffer, advances
// k, and throws DivergenceError if the new iterate is non-finite or exceeds
// 1e12 (1 + ||x0||) in norm.

// x_k = x_{k-1} - s_k with s_k from the stacked damped problem.
void slimls_step(SolverState& state, SampleBlock blk, double alpha, const Regularizer& reg,
                 InnerMethod inner = InnerMethod::lsqr, const LsqrOptions& lsqr = {});
// x_k = x_{k-1} - alpha A_k^T (A_k x_{k-1} - b_k)
void sg_step(SolverState& state, SampleBlock blk, double alpha);
// Single-row projection; blk must hold exactly one row.
void kaczmarz_step(SolverState& state, SampleBlock blk, double alpha);
// Row-level form of the projection on a bare iterate.
void kaczmarz_update(Vector& x, const Eigen::Ref<const Eigen::RowVectorXd>& row, double rhs, double alpha);
// x_k = x_{k-1} - alpha A_k^+ (A_k x_{k-1} - b_k), A_k^+ via min-norm LSQR.
void block_kaczmarz_step(SolverState& state, SampleBlock blk, double alpha, const LsqrOptions& lsqr = {});
// x_k = x_{k-1} - (alpha^{-1} I + A_k^T A_k)^{-1} A_k^T (A_k x_{k-1} - b_k)
void damped_block_kaczmarz_step(SolverState& state, SampleBlock blk, double alpha,
                                InnerMethod inner = InnerMethod::lsqr, const LsqrOptions& lsqr = {});
// x_k = x_{k-1} - G_k^+ A_k^T (A_k x_{k-1} - b_k), G_k = sum_{i<=k} A_i^T A_i.
void recursive_ls_step(SolverState& state, SampleBlock blk, double pinv_cutoff = 1e-12);
void olbfgs_step(SolverState& state, SampleBlock blk, double alpha, std::size_t memory,
                 double curvature_threshold = 1e-12);
// Tikhonov-augmented limited-memory step with C = L^T L:
//   x_k = x_{k-1} - ((1/alpha + j lambda^2/M) L^T L + M_k^T M_k)^{-1}
//                   (A_k^T (A_k x_{k-1} - b_k) + (lambda^2/M) L^T L x_{k-1})
// where j is the number of blocks currently stacked in M_k (r+1 once the
// buffer is full).
void slimtik_step(SolverState& state, SampleBlock blk, double alpha, const Regularizer& reg,
                  double lambda, std::size_t n_blocks, InnerMethod inner = InnerMethod::lsqr,
                  const LsqrOptions& lsqr = {});

// Two-loop recursion H g over the stored pairs with H_0 = I.
Vector lbfgs_direction(const std::deque<CurvaturePair>& pairs, const Vector& gradient);

// One iteration of options.method with alpha_k = schedule.alpha(k).
void step(SolverState& state, SampleBlock blk, const SolverOptions& options);

enum class RunStatus { ok, diverged };

struct StepRecord {
  std::size_t k = 0;
  std::size_t block_index = 0;
  double alpha = 0.0;
  double sampled_residual_norm = 0.0;
  double wall_time_seconds = 0.0;
};

struct RunOptions {
  // Measured in blocks: epochs * M iterations (rounded to nearest).
  double epochs = 1.0;
  std::optional<Vector> x0;
  bool keep_iterates = false;
  // Called after x_0 (k = 0, no record) and after every iteration.
  std::function<void(const SolverState&, const StepRecord*)> observer;
};

struct Trajectory {
  RunStatus status = RunStatus::ok;
  std::string message;
  std::vector<StepRecord> steps;
  std::vector<Vector> iterates;  // x_0..x_K when keep_iterates
  Vector final_x;
};

std::size_t iteration_count(double epochs, std::size_t n_blocks);

// Drives `options.method` over blocks drawn by `sampler`. Single-pass
// operators need a cyclic sampler and at most one epoch; no method keeps
// blocks outside its MemoryBuffer, so all of them can stream.
Trajectory run(const SolverOptions& options, const RowBlockOperator& op, Sampler& sampler,
               const RunOptions& run_options);

}  // namespace slim
