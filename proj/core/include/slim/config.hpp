#pragma once

#include "slim/sampling.hpp"
#include "slim/solvers.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace slim {

// Validation failure in a config file; the message carries source:line.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

enum class ProblemKind { gaussian, tomo2d, tomo3d, file };
enum class ErrorReference { x_true, x_ls, x_hat };
enum class RegularizerKind { identity, bidiagonal };

std::string_view to_string(ProblemKind kind);
std::string_view to_string(ErrorReference ref);

struct ProblemConfig {
  ProblemKind kind = ProblemKind::gaussian;
  // gaussian
  std::size_t m = 1000;
  std::size_t n = 100;
  std::size_t blocks = 100;
  // tomo2d / tomo3d: grid side, views, detector
  std::size_t grid = 64;
  double angle_first = -60.0;
  double angle_step = 3.0;
  std::size_t views = 40;
  std::uint64_t direction_seed = 1;
  std::size_t rays_per_view = 0;
  // all synthetic problems
  double noise_level = 0.01;
  std::uint64_t seed = 1;
  // file
  std::filesystem::path path;
};

struct SolverConfig {
  Method method = Method::slimls;
  double alpha = 1.0;
  Schedule::Kind schedule = Schedule::Kind::constant;
  double decay_exponent = 1.0;
  std::size_t ramp_length = 0;  // 0: r + 1
  std::size_t memory = 0;
  double lambda = 0.0;
  RegularizerKind regularizer = RegularizerKind::identity;
  double regularizer_shift = 0.5;
  InnerMethod inner = InnerMethod::lsqr;
  double lsqr_tolerance = 1e-10;
  std::size_t lsqr_max_iterations = 0;
  std::size_t lbfgs_memory = 10;
};

struct RunConfig {
  SamplingScheme scheme = SamplingScheme::uniform_iid;
  double epochs = 1.0;
  std::size_t replicates = 1;
  std::uint64_t base_seed = 0;
  std::size_t workers = 1;
};

struct OutputConfig {
  std::vector<ErrorReference> references;
  // False when references were filled in from the problem-kind default.
  bool references_explicit = false;
  std::filesystem::path path = "slim_out";
  std::size_t record_every = 1;
};

struct SweepConfig {
  std::vector<double> alpha;
  std::vector<std::size_t> memory;
  std::vector<Method> methods;
};

struct TheoryConfig {
  std::vector<double> alpha;
  std::size_t k_max = 200;
};

struct ExperimentConfig {
  ProblemConfig problem;
  SolverConfig solver;
  RunConfig run;
  OutputConfig output;
  SweepConfig sweep;
  TheoryConfig theory;
};

// Grammar: one `key = value` per line inside [problem], [solver], [run],
// [output], [sweep] or [theory] sections; `#` starts a comment. Lists are
// comma separated. Unknown sections and keys are errors. Relative paths
// are resolved against base_dir.
ExperimentConfig parse_config(std::string_view text, std::string_view source = "<config>",
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

// Default error references per problem kind: x_hat for gaussian, x_true for
// tomography, x_ls for files.
std::vector<ErrorReference> default_references(ProblemKind kind);

// L for the configured regularizer on an n-dimensional problem.
Regularizer make_regularizer(const SolverConfig& config, std::size_t n);
SolverOptions make_solver_options(const SolverConfig& config, std::size_t n, std::size_t n_blocks);

}  // namespace slim
