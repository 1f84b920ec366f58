#pragma once

#include "slim/config.hpp"
#include "slim/tomo.hpp"

#include <array>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace slim {

// An assembled problem; the operator carries b.
struct Problem {
  std::unique_ptr<RowBlockOperator> op;
  std::optional<Vector> x_true;
  std::optional<Phantom> phantom;
};

Problem build_problem(const ProblemConfig& config);

// Reference solutions indexed by ErrorReference. x_ls and x_hat come from
// the dense analysis routines and are computed once per experiment.
struct References {
  std::array<std::optional<Vector>, 3> vectors;

  const std::optional<Vector>& get(ErrorReference r) const {
    return vectors[static_cast<std::size_t>(r)];
  }
};

// Explicitly requested references that cannot be formed (no ground truth,
// n above the desk-scale guard) raise ConfigError; defaulted ones are
// silently dropped.
References compute_references(const ExperimentConfig& config, const Problem& problem);

struct MetricsRow {
  std::size_t replicate = 0;
  std::size_t k = 0;
  double epoch_fraction = 0.0;
  std::array<std::optional<double>, 3> rel_err;  // x_true, x_ls, x_hat
  std::optional<double> sampled_residual_norm;
  std::optional<double> alpha;
  double wall_time_seconds = 0.0;  // cumulative within the replicate
  RunStatus status = RunStatus::ok;
};

struct Summary {
  double median = 0.0;
  double p05 = 0.0;
  double p95 = 0.0;
};

struct AggregateRow {
  std::size_t k = 0;
  double epoch_fraction = 0.0;
  std::array<std::optional<Summary>, 3> rel_err;
  std::size_t diverged = 0;  // replicates diverged at or before k
};

struct ExperimentResult {
  std::size_t n_blocks = 0;
  std::size_t iterations = 0;
  std::size_t replicates = 0;
  std::size_t diverged = 0;
  std::array<bool, 3> active{};  // reference columns present
  std::vector<MetricsRow> rows;  // ordered by (replicate, k)
  std::vector<AggregateRow> aggregate;

  // Aggregate row at iteration k, if recorded.
  const AggregateRow* at(std::size_t k) const;
};

// Percentile with linear interpolation between order statistics
// (position q (N-1)). Infinite values sort last.
double percentile(std::vector<double> values, double q);

// Runs all replicates; replicate j samples with seed base_seed + j.
// Iterations 0, record_every, 2 record_every, ..., M and the last one are
// recorded. A replicate that diverges contributes a final "diverged" row
// and counts as +inf in the aggregates from then on.
ExperimentResult run_experiment(const ExperimentConfig& config);
ExperimentResult run_experiment(const ExperimentConfig& config, const Problem& problem,
                                const References& refs);

void write_metrics_csv(std::ostream& out, const ExperimentResult& result);
void write_aggregate_csv(std::ostream& out, const ExperimentResult& result);

// run_experiment plus <path>_metrics.csv and <path>_aggregate.csv.
ExperimentResult run_and_write(const ExperimentConfig& config);

enum class SweepAxis { alpha, memory, method };
SweepAxis parse_sweep_axis(std::string_view name);
std::string_view to_string(SweepAxis axis);

struct SweepPoint {
  std::string value;
  ExperimentResult result;
};

// One experiment per grid value over a shared problem instance. With
// write_files, each point writes <path>_<axis>=<value>_{metrics,aggregate}.csv
// and the summary goes to <path>_sweep_<axis>.csv.
std::vector<SweepPoint> sweep(const ExperimentConfig& config, SweepAxis axis, bool write_files);

// Columns: axis,value,reference,median_one_epoch,median_final,p05_final,
// p95_final,diverged.
void write_sweep_summary(std::ostream& out, SweepAxis axis, const std::vector<SweepPoint>& points);

struct StreamRow {
  std::size_t k = 0;
  std::size_t block_index = 0;
  std::array<std::optional<double>, 3> rel_err;
  double sampled_residual_norm = 0.0;
  double alpha = 0.0;
  std::size_t buffered_blocks = 0;
};

struct StreamResult {
  RunStatus status = RunStatus::ok;
  std::vector<StreamRow> rows;
  std::array<bool, 3> active{};
  Vector final_x;
  std::size_t consumed = 0;
};

// One pass over the blocks in arrival order from a single-pass source:
// the streamed-matrix file for kind = file, otherwise a single-pass view of
// the generated problem. Writes <path>_stream.csv when write_files.
StreamResult stream_demo(const ExperimentConfig& config, bool write_files);

// Exact theory checks for every theory.alpha (x0 = 0, k <= theory.k_max).
// Writes <path>_theory.csv to `out` when given, else to the file. Returns
// whether every inequality held.
bool verify_theory(const ExperimentConfig& config, std::ostream* out = nullptr);

// Writes <path>.slim, plus <path>_xtrue.slimf when the ground truth is known
// and <path>_sinogram.csv for 2D tomography.
void gen_problem(const ExperimentConfig& config);

}  // namespace slim
