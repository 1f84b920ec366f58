#include "slim/experiment.hpp"

#include "slim/analysis.hpp"
#include "slim/csv.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

namespace slim {
namespace {

constexpr std::size_t kRefCount = 3;
constexpr std::array<ErrorReference, kRefCount> kAllRefs = {
    ErrorReference::x_true, ErrorReference::x_ls, ErrorReference::x_hat};

std::filesystem::path with_suffix(const std::filesystem::path& base, const std::string& suffix) {
  return std::filesystem::path(base.string() + suffix);
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

bool requested(const ExperimentConfig& c, ErrorReference r) {
  return std::find(c.output.references.begin(), c.output.references.end(), r) !=
         c.output.references.end();
}

// Builds reference vectors; the dense model is created lazily and reused
// for every alpha of a sweep.
class ReferenceBuilder {
 public:
  ReferenceBuilder(const ExperimentConfig& config, const Problem& problem)
      : config_(config), problem_(problem) {}

  References build(double alpha) {
    References refs;
    const bool explicit_refs = config_.output.references_explicit;
    if (requested(config_, ErrorReference::x_true)) {
      if (problem_.x_true) {
        refs.vectors[0] = *problem_.x_true;
      } else if (explicit_refs) {
        throw ConfigError("x_true is not known for problem kind '" +
                          std::string(to_string(config_.problem.kind)) + "'");
      }
    }
    const bool want_ls = requested(config_, ErrorReference::x_ls);
    const bool want_hat = requested(config_, ErrorReference::x_hat);
    if (!want_ls && !want_hat) return refs;
    if (!model_ready_) {
      model_ready_ = true;
      try {
        model_ = std::make_unique<DeskModel>(*problem_.op);
      } catch (const ScaleGuard& e) {
        if (explicit_refs) throw ConfigError(std::string("x_ls/x_hat references: ") + e.what());
      } catch (const SingularSystem& e) {
        if (explicit_refs) throw ConfigError(std::string("x_ls/x_hat references: ") + e.what());
      }
    }
    if (!model_) return refs;
    if (want_ls) refs.vectors[1] = model_->x_ls();
    if (want_hat) refs.vectors[2] = model_->constants(alpha).x_hat;
    return refs;
  }

 private:
  const ExperimentConfig& config_;
  const Problem& problem_;
  bool model_ready_ = false;
  std::unique_ptr<DeskModel> model_;
};

std::array<std::optional<double>, kRefCount> relative_errors(const Vector& x, const References& refs,
                                                             const std::array<double, kRefCount>& norms) {
  std::array<std::optional<double>, kRefCount> out;
  for (std::size_t r = 0; r < kRefCount; ++r) {
    if (!refs.vectors[r]) continue;
    const double diff = (x - *refs.vectors[r]).norm();
    out[r] = norms[r] > 0.0 ? diff / norms[r] : diff;
  }
  return out;
}

std::array<double, kRefCount> reference_norms(const References& refs) {
  std::array<double, kRefCount> norms{};
  for (std::size_t r = 0; r < kRefCount; ++r) {
    if (refs.vectors[r]) norms[r] = refs.vectors[r]->norm();
  }
  return norms;
}

std::array<bool, kRefCount> active_columns(const References& refs) {
  std::array<bool, kRefCount> a{};
  for (std::size_t r = 0; r < kRefCount; ++r) a[r] = refs.vectors[r].has_value();
  return a;
}

double lerp_inf(double a, double b, double t) {
  if (t == 0.0 || a == b) return a;
  if (std::isinf(a) || std::isinf(b)) return std::numeric_limits<double>::infinity();
  return a + (b - a) * t;
}

struct ReplicateRun {
  std::vector<MetricsRow> rows;
  std::optional<std::size_t> diverged_at;
};

std::vector<std::size_t> recorded_iterations(std::size_t total, std::size_t every, std::size_t m) {
  std::vector<std::size_t> ks;
  for (std::size_t k = 0; k <= total; ++k) {
    if (k % every == 0 || k == m || k == total) ks.push_back(k);
  }
  return ks;
}

}  // namespace

Problem build_problem(const ProblemConfig& c) {
  Problem p;
  switch (c.kind) {
    case ProblemKind::gaussian: {
      TestProblem t = gaussian_testproblem(c.m, c.n, c.blocks, c.seed, c.noise_level);
      p.op = std::move(t.op);
      p.x_true = std::move(t.x_true);
      break;
    }
    case ProblemKind::tomo2d:
    case ProblemKind::tomo3d: {
      const bool two_d = c.kind == ProblemKind::tomo2d;
      Phantom ph = shepp_logan(two_d ? 2 : 3, c.grid);
      ProjectionGeometry g =
          two_d ? ProjectionGeometry::parallel_2d(angle_range(c.angle_first, c.angle_step, c.views))
                : ProjectionGeometry::parallel_3d(random_directions(c.views, c.direction_seed));
      g.rays_per_view = c.rays_per_view;
      auto op = build_projector(g, c.grid);
      op->set_data(simulate_data(*op, ph.voxels, c.noise_level, c.seed));
      p.op = std::move(op);
      p.x_true = ph.voxels;
      p.phantom = std::move(ph);
      break;
    }
    case ProblemKind::file:
      p.op = load_stream_file(c.path);
      break;
  }
  return p;
}

References compute_references(const ExperimentConfig& config, const Problem& problem) {
  ReferenceBuilder builder(config, problem);
  return builder.build(config.solver.alpha);
}

const AggregateRow* ExperimentResult::at(std::size_t k) const {
  auto it = std::lower_bound(aggregate.begin(), aggregate.end(), k,
                             [](const AggregateRow& row, std::size_t key) { return row.k < key; });
  return it != aggregate.end() && it->k == k ? &*it : nullptr;
}

double percentile(std::vector<double> values, double q) {
  require(!values.empty(), "percentile of an empty sample");
  require(q >= 0.0 && q <= 1.0, "percentile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return lerp_inf(values[lo], values[hi], pos - static_cast<double>(lo));
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  Problem problem = build_problem(config.problem);
  References refs = compute_references(config, problem);
  return run_experiment(config, problem, refs);
}

ExperimentResult run_experiment(const ExperimentConfig& config, const Problem& problem,
                                const References& refs) {
  const RowBlockOperator& op = *problem.op;
  const std::size_t m = op.n_blocks();
  const std::size_t total = iteration_count(config.run.epochs, m);
  if (config.run.epochs > 0.0 && total == 0) {
    throw ConfigError("run.epochs * M must be at least 1 (or epochs = 0)");
  }
  const SolverOptions options = make_solver_options(config.solver, op.n_cols(), m);
  const std::array<double, kRefCount> norms = reference_norms(refs);
  const std::size_t every = config.output.record_every;
  const double inv_m = 1.0 / static_cast<double>(m);
  auto record_k = [&](std::size_t k) { return k % every == 0 || k == m || k == total; };

  std::vector<ReplicateRun> runs(config.run.replicates);
  auto run_one = [&](std::size_t rep) {
    Sampler sampler(config.run.scheme, m, config.run.base_seed + rep);
    ReplicateRun& out = runs[rep];
    double elapsed = 0.0;
    RunOptions ro;
    ro.epochs = config.run.epochs;
    ro.observer = [&](const SolverState& state, const StepRecord* rec) {
      if (rec) elapsed += rec->wall_time_seconds;
      if (!record_k(state.k)) return;
      MetricsRow row;
      row.replicate = rep;
      row.k = state.k;
      row.epoch_fraction = static_cast<double>(state.k) * inv_m;
      row.rel_err = relative_errors(state.x, refs, norms);
      if (rec) {
        row.sampled_residual_norm = rec->sampled_residual_norm;
        row.alpha = rec->alpha;
      }
      row.wall_time_seconds = elapsed;
      out.rows.push_back(std::move(row));
    };
    Trajectory traj = run(options, op, sampler, ro);
    if (traj.status == RunStatus::diverged) {
      const StepRecord& last = traj.steps.back();
      MetricsRow row;
      row.replicate = rep;
      row.k = last.k;
      row.epoch_fraction = static_cast<double>(last.k) * inv_m;
      for (std::size_t r = 0; r < kRefCount; ++r) {
        if (refs.vectors[r]) row.rel_err[r] = std::numeric_limits<double>::infinity();
      }
      row.sampled_residual_norm = last.sampled_residual_norm;
      row.alpha = last.alpha;
      row.wall_time_seconds = elapsed + last.wall_time_seconds;
      row.status = RunStatus::diverged;
      out.rows.push_back(std::move(row));
      out.diverged_at = last.k;
    }
  };

  const std::size_t workers = std::min(config.run.workers, config.run.replicates);
  if (workers <= 1) {
    for (std::size_t rep = 0; rep < runs.size(); ++rep) run_one(rep);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t rep = next++; rep < runs.size(); rep = next++) {
          try {
            run_one(rep);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  ExperimentResult result;
  result.n_blocks = m;
  result.iterations = total;
  result.replicates = runs.size();
  result.active = active_columns(refs);
  for (auto& r : runs) {
    if (r.diverged_at) ++result.diverged;
    result.rows.insert(result.rows.end(), r.rows.begin(), r.rows.end());
  }

  for (std::size_t k : recorded_iterations(total, every, m)) {
    AggregateRow agg;
    agg.k = k;
    agg.epoch_fraction = static_cast<double>(k) * inv_m;
    std::array<std::vector<double>, kRefCount> samples;
    for (const ReplicateRun& r : runs) {
      if (r.diverged_at && *r.diverged_at <= k) {
        ++agg.diverged;
        for (std::size_t c = 0; c < kRefCount; ++c) {
          if (result.active[c]) samples[c].push_back(std::numeric_limits<double>::infinity());
        }
        continue;
      }
      auto it = std::lower_bound(r.rows.begin(), r.rows.end(), k,
                                 [](const MetricsRow& row, std::size_t key) { return row.k < key; });
      if (it == r.rows.end() || it->k != k) continue;
      for (std::size_t c = 0; c < kRefCount; ++c) {
        if (it->rel_err[c]) samples[c].push_back(*it->rel_err[c]);
      }
    }
    for (std::size_t c = 0; c < kRefCount; ++c) {
      if (samples[c].empty()) continue;
      agg.rel_err[c] = Summary{percentile(samples[c], 0.5), percentile(samples[c], 0.05),
                               percentile(samples[c], 0.95)};
    }
    result.aggregate.push_back(std::move(agg));
  }
  return result;
}

void write_metrics_csv(std::ostream& out, const ExperimentResult& result) {
  CsvWriter csv(out);
  csv.field("replicate").field("k").field("epoch_fraction").field("rel_err_true").field("rel_err_xls");
  csv.field("rel_err_xhat").field("sampled_residual_norm").field("alpha_k").field("wall_time_seconds");
  csv.field("status").end_row();
  for (const MetricsRow& row : result.rows) {
    csv.field(row.replicate).field(row.k).field(row.epoch_fraction);
    for (std::size_t c = 0; c < kRefCount; ++c) csv.field(row.rel_err[c]);
    csv.field(row.sampled_residual_norm).field(row.alpha).field(row.wall_time_seconds);
    csv.field(row.status == RunStatus::ok ? "ok" : "diverged").end_row();
  }
}

void write_aggregate_csv(std::ostream& out, const ExperimentResult& result) {
  static const std::array<const char*, kRefCount> names = {"true", "xls", "xhat"};
  CsvWriter csv(out);
  csv.field("k").field("epoch_fraction");
  for (std::size_t c = 0; c < kRefCount; ++c) {
    if (!result.active[c]) continue;
    for (const char* stat : {"median", "p05", "p95"}) {
      csv.field("rel_err_" + std::string(names[c]) + "_" + stat);
    }
  }
  csv.field("diverged").end_row();
  for (const AggregateRow& row : result.aggregate) {
    csv.field(row.k).field(row.epoch_fraction);
    for (std::size_t c = 0; c < kRefCount; ++c) {
      if (!result.active[c]) continue;
      if (row.rel_err[c]) {
        csv.field(row.rel_err[c]->median).field(row.rel_err[c]->p05).field(row.rel_err[c]->p95);
      } else {
        csv.empty().empty().empty();
      }
    }
    csv.field(row.diverged).end_row();
  }
}

namespace {

void write_result_files(const std::filesystem::path& base, const ExperimentResult& result) {
  {
    std::ofstream out = open_output(with_suffix(base, "_metrics.csv"));
    write_metrics_csv(out, result);
  }
  std::ofstream out = open_output(with_suffix(base, "_aggregate.csv"));
  write_aggregate_csv(out, result);
}

}  // namespace

ExperimentResult run_and_write(const ExperimentConfig& config) {
  ExperimentResult result = run_experiment(config);
  write_result_files(config.output.path, result);
  return result;
}

SweepAxis parse_sweep_axis(std::string_view name) {
  if (name == "alpha" || name == "alpha_grid") return SweepAxis::alpha;
  if (name == "memory" || name == "r" || name == "r_grid") return SweepAxis::memory;
  if (name == "method" || name == "method_set") return SweepAxis::method;
  throw InvalidArgument("unknown sweep axis '" + std::string(name) + "'");
}

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::alpha: return "alpha";
    case SweepAxis::memory: return "memory";
    case SweepAxis::method: return "method";
  }
  return "?";
}

std::vector<SweepPoint> sweep(const ExperimentConfig& config, SweepAxis axis, bool write_files) {
  std::vector<ExperimentConfig> grid;
  std::vector<std::string> labels;
  switch (axis) {
    case SweepAxis::alpha:
      if (config.sweep.alpha.empty()) throw ConfigError("sweep over alpha needs [sweep] alpha");
      for (double a : config.sweep.alpha) {
        ExperimentConfig c = config;
        c.solver.alpha = a;
        grid.push_back(std::move(c));
        labels.push_back(format_double(a));
      }
      break;
    case SweepAxis::memory:
      if (config.sweep.memory.empty()) throw ConfigError("sweep over memory needs [sweep] memory");
      for (std::size_t r : config.sweep.memory) {
        ExperimentConfig c = config;
        c.solver.memory = r;
        grid.push_back(std::move(c));
        labels.push_back(std::to_string(r));
      }
      break;
    case SweepAxis::method:
      if (config.sweep.methods.empty()) throw ConfigError("sweep over methods needs [sweep] methods");
      for (Method mth : config.sweep.methods) {
        ExperimentConfig c = config;
        c.solver.method = mth;
        grid.push_back(std::move(c));
        labels.push_back(std::string(to_string(mth)));
      }
      break;
  }

  Problem problem = build_problem(config.problem);
  ReferenceBuilder builder(config, problem);
  std::vector<SweepPoint> points;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const References refs = builder.build(grid[i].solver.alpha);
    SweepPoint pt{labels[i], run_experiment(grid[i], problem, refs)};
    if (write_files) {
      write_result_files(
          with_suffix(config.output.path, "_" + std::string(to_string(axis)) + "=" + labels[i]),
          pt.result);
    }
    points.push_back(std::move(pt));
  }
  if (write_files) {
    std::ofstream out =
        open_output(with_suffix(config.output.path, "_sweep_" + std::string(to_string(axis)) + ".csv"));
    write_sweep_summary(out, axis, points);
  }
  return points;
}

void write_sweep_summary(std::ostream& out, SweepAxis axis, const std::vector<SweepPoint>& points) {
  CsvWriter csv(out);
  csv.field("axis").field("value").field("reference").field("median_one_epoch").field("median_final");
  csv.field("p05_final").field("p95_final").field("diverged").end_row();
  for (const SweepPoint& pt : points) {
    const ExperimentResult& r = pt.result;
    const AggregateRow* epoch = r.at(r.n_blocks);
    const AggregateRow* last = r.aggregate.empty() ? nullptr : &r.aggregate.back();
    for (std::size_t c = 0; c < kRefCount; ++c) {
      if (!r.active[c]) continue;
      csv.field(to_string(axis)).field(pt.value).field(to_string(kAllRefs[c]));
      csv.field(epoch && epoch->rel_err[c] ? std::optional<double>(epoch->rel_err[c]->median)
                                           : std::nullopt);
      if (last && last->rel_err[c]) {
        csv.field(last->rel_err[c]->median).field(last->rel_err[c]->p05).field(last->rel_err[c]->p95);
      } else {
        csv.empty().empty().empty();
      }
      csv.field(r.diverged).end_row();
    }
  }
}

StreamResult stream_demo(const ExperimentConfig& config, bool write_files) {
  Problem problem = build_problem(config.problem);
  const References refs = compute_references(config, problem);
  const std::array<double, kRefCount> norms = reference_norms(refs);

  std::unique_ptr<StreamedFileOperator> file_stream;
  std::unique_ptr<SinglePassView> view;
  const RowBlockOperator* source = nullptr;
  if (config.problem.kind == ProblemKind::file) {
    file_stream = std::make_unique<StreamedFileOperator>(config.problem.path);
    source = file_stream.get();
  } else {
    view = std::make_unique<SinglePassView>(*problem.op);
    source = view.get();
  }

  const SolverOptions options =
      make_solver_options(config.solver, source->n_cols(), source->n_blocks());
  Sampler sampler(SamplingScheme::cyclic, source->n_blocks(), config.run.base_seed);
  StreamResult result;
  result.active = active_columns(refs);
  RunOptions ro;
  ro.epochs = 1.0;
  ro.observer = [&](const SolverState& state, const StepRecord* rec) {
    if (!rec) return;
    StreamRow row;
    row.k = rec->k;
    row.block_index = rec->block_index;
    row.rel_err = relative_errors(state.x, refs, norms);
    row.sampled_residual_norm = rec->sampled_residual_norm;
    row.alpha = rec->alpha;
    row.buffered_blocks = state.buffer.size();
    result.rows.push_back(row);
  };
  Trajectory traj = run(options, *source, sampler, ro);
  result.status = traj.status;
  result.final_x = std::move(traj.final_x);
  result.consumed = file_stream ? file_stream->consumed() : view->consumed();

  if (write_files) {
    std::ofstream out = open_output(with_suffix(config.output.path, "_stream.csv"));
    CsvWriter csv(out);
    csv.field("k").field("block_index").field("rel_err_true").field("rel_err_xls").field("rel_err_xhat");
    csv.field("sampled_residual_norm").field("alpha_k").field("buffered_blocks").end_row();
    for (const StreamRow& row : result.rows) {
      csv.field(row.k).field(row.block_index);
      for (std::size_t c = 0; c < kRefCount; ++c) csv.field(row.rel_err[c]);
      csv.field(row.sampled_residual_norm).field(row.alpha).field(row.buffered_blocks).end_row();
    }
  }
  return result;
}

bool verify_theory(const ExperimentConfig& config, std::ostream* out) {
  Problem problem = build_problem(config.problem);
  DeskModel model(*problem.op);
  const Vector x0 = Vector::Zero(static_cast<Eigen::Index>(model.n_cols()));
  const double b_norm = model.rhs().norm();

  std::ofstream file;
  if (!out) {
    file = open_output(with_suffix(config.output.path, "_theory.csv"));
    out = &file;
  }
  bool all = true;
  bool header = true;
  for (double alpha : config.theory.alpha) {
    const TheoryConstants t = model.constants(alpha);
    std::vector<InequalityCheck> checks = contraction_checks(t);
    checks.push_back(bias_bound_check(t));
    const MomentTrace trace = model.moments(t, x0, config.theory.k_max);
    for (InequalityCheck& c : moment_checks(t, trace, x0)) checks.push_back(std::move(c));
    const double stat = model.stationarity_residual(alpha, t.x_hat);
    checks.push_back({"stationarity residual <= 1e-10 ||b||", stat, 1e-10 * b_norm,
                      stat <= 1e-10 * b_norm});
    const double gap = (t.x_hat - t.x_hat_projection).norm();
    const double scale = 1e-10 * t.x_hat.norm();
    checks.push_back({"x_hat forms agree", gap, scale, gap <= scale});
    for (const InequalityCheck& c : checks) all = all && c.holds;
    write_theory_report(*out, t, checks, header);
    header = false;
  }
  return all;
}

void gen_problem(const ExperimentConfig& config) {
  Problem problem = build_problem(config.problem);
  const std::filesystem::path base = config.output.path;
  if (base.has_parent_path()) std::filesystem::create_directories(base.parent_path());
  write_stream_file(with_suffix(base, ".slim"), *problem.op);
  if (problem.x_true) {
    std::vector<std::uint64_t> extents;
    if (problem.phantom) {
      extents.assign(problem.phantom->dims, problem.phantom->n);
    } else {
      extents = {static_cast<std::uint64_t>(problem.x_true->size())};
    }
    write_flat(with_suffix(base, "_xtrue.slimf"), *problem.x_true, extents);
  }
  if (config.problem.kind == ProblemKind::tomo2d) {
    write_grid_csv(with_suffix(base, "_sinogram.csv"), problem.op->rhs(), problem.op->n_blocks(),
                   problem.op->block_rows());
  }
}

}  // namespace slim
