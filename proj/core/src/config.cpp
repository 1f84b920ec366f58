#include "slim/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace slim {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    out.push_back(trim(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

double to_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw InvalidArgument("expected a finite number, got '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t to_u64(std::string_view s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw InvalidArgument("expected a non-negative integer, got '" + std::string(s) + "'");
  }
  return v;
}

std::size_t to_size(std::string_view s) { return static_cast<std::size_t>(to_u64(s)); }

double positive(double v) {
  if (!(v > 0.0)) throw InvalidArgument("value must be positive");
  return v;
}

ProblemKind parse_problem_kind(std::string_view s) {
  if (s == "gaussian") return ProblemKind::gaussian;
  if (s == "tomo2d") return ProblemKind::tomo2d;
  if (s == "tomo3d") return ProblemKind::tomo3d;
  if (s == "file") return ProblemKind::file;
  throw InvalidArgument("unknown problem kind '" + std::string(s) + "'");
}

ErrorReference parse_reference(std::string_view s) {
  if (s == "x_true") return ErrorReference::x_true;
  if (s == "x_ls") return ErrorReference::x_ls;
  if (s == "x_hat") return ErrorReference::x_hat;
  throw InvalidArgument("unknown error reference '" + std::string(s) + "'");
}

Schedule::Kind parse_schedule(std::string_view s) {
  if (s == "constant") return Schedule::Kind::constant;
  if (s == "ramp") return Schedule::Kind::ramp;
  if (s == "decay") return Schedule::Kind::decay;
  throw InvalidArgument("unknown schedule '" + std::string(s) + "'");
}

RegularizerKind parse_regularizer(std::string_view s) {
  if (s == "identity") return RegularizerKind::identity;
  if (s == "bidiagonal") return RegularizerKind::bidiagonal;
  throw InvalidArgument("unknown regularizer '" + std::string(s) + "'");
}

using Setter = std::function<void(ExperimentConfig&, std::string_view, const std::filesystem::path&)>;

const std::map<std::string, Setter>& setters() {
  using C = ExperimentConfig;
  using P = std::filesystem::path;
  static const std::map<std::string, Setter> table = {
      {"problem.kind", [](C& c, std::string_view v, const P&) { c.problem.kind = parse_problem_kind(v); }},
      {"problem.m", [](C& c, std::string_view v, const P&) { c.problem.m = to_size(v); }},
      {"problem.n", [](C& c, std::string_view v, const P&) { c.problem.n = to_size(v); }},
      {"problem.blocks", [](C& c, std::string_view v, const P&) { c.problem.blocks = to_size(v); }},
      {"problem.grid", [](C& c, std::string_view v, const P&) { c.problem.grid = to_size(v); }},
      {"problem.angle_first", [](C& c, std::string_view v, const P&) { c.problem.angle_first = to_double(v); }},
      {"problem.angle_step", [](C& c, std::string_view v, const P&) { c.problem.angle_step = to_double(v); }},
      {"problem.views", [](C& c, std::string_view v, const P&) { c.problem.views = to_size(v); }},
      {"problem.direction_seed", [](C& c, std::string_view v, const P&) { c.problem.direction_seed = to_u64(v); }},
      {"problem.rays_per_view", [](C& c, std::string_view v, const P&) { c.problem.rays_per_view = to_size(v); }},
      {"problem.noise_level", [](C& c, std::string_view v, const P&) { c.problem.noise_level = to_double(v); }},
      {"problem.seed", [](C& c, std::string_view v, const P&) { c.problem.seed = to_u64(v); }},
      {"problem.path", [](C& c, std::string_view v, const P& base) { c.problem.path = base / P(v); }},

      {"solver.method", [](C& c, std::string_view v, const P&) { c.solver.method = parse_method(v); }},
      {"solver.alpha", [](C& c, std::string_view v, const P&) { c.solver.alpha = positive(to_double(v)); }},
      {"solver.schedule", [](C& c, std::string_view v, const P&) { c.solver.schedule = parse_schedule(v); }},
      {"solver.decay_exponent", [](C& c, std::string_view v, const P&) { c.solver.decay_exponent = positive(to_double(v)); }},
      {"solver.ramp_length", [](C& c, std::string_view v, const P&) { c.solver.ramp_length = to_size(v); }},
      {"solver.memory", [](C& c, std::string_view v, const P&) { c.solver.memory = to_size(v); }},
      {"solver.lambda", [](C& c, std::string_view v, const P&) { c.solver.lambda = to_double(v); }},
      {"solver.regularizer", [](C& c, std::string_view v, const P&) { c.solver.regularizer = parse_regularizer(v); }},
      {"solver.regularizer_shift", [](C& c, std::string_view v, const P&) { c.solver.regularizer_shift = to_double(v); }},
      {"solver.inner", [](C& c, std::string_view v, const P&) { c.solver.inner = parse_inner_method(v); }},
      {"solver.lsqr_tolerance", [](C& c, std::string_view v, const P&) { c.solver.lsqr_tolerance = positive(to_double(v)); }},
      {"solver.lsqr_max_iterations", [](C& c, std::string_view v, const P&) { c.solver.lsqr_max_iterations = to_size(v); }},
      {"solver.lbfgs_memory", [](C& c, std::string_view v, const P&) { c.solver.lbfgs_memory = to_size(v); }},

      {"run.sampling", [](C& c, std::string_view v, const P&) { c.run.scheme = parse_sampling_scheme(v); }},
      {"run.epochs", [](C& c, std::string_view v, const P&) { c.run.epochs = to_double(v); }},
      {"run.replicates", [](C& c, std::string_view v, const P&) { c.run.replicates = to_size(v); }},
      {"run.base_seed", [](C& c, std::string_view v, const P&) { c.run.base_seed = to_u64(v); }},
      {"run.workers", [](C& c, std::string_view v, const P&) { c.run.workers = to_size(v); }},

      {"output.references", [](C& c, std::string_view v, const P&) {
         c.output.references.clear();
         for (auto item : split_list(v)) c.output.references.push_back(parse_reference(item));
         c.output.references_explicit = true;
       }},
      {"output.path", [](C& c, std::string_view v, const P& base) { c.output.path = base / P(v); }},
      {"output.record_every", [](C& c, std::string_view v, const P&) { c.output.record_every = to_size(v); }},

      {"sweep.alpha", [](C& c, std::string_view v, const P&) {
         c.sweep.alpha.clear();
         for (auto item : split_list(v)) c.sweep.alpha.push_back(positive(to_double(item)));
       }},
      {"sweep.memory", [](C& c, std::string_view v, const P&) {
         c.sweep.memory.clear();
         for (auto item : split_list(v)) c.sweep.memory.push_back(to_size(item));
       }},
      {"sweep.methods", [](C& c, std::string_view v, const P&) {
         c.sweep.methods.clear();
         for (auto item : split_list(v)) c.sweep.methods.push_back(parse_method(item));
       }},

      {"theory.alpha", [](C& c, std::string_view v, const P&) {
         c.theory.alpha.clear();
         for (auto item : split_list(v)) c.theory.alpha.push_back(positive(to_double(item)));
       }},
      {"theory.k_max", [](C& c, std::string_view v, const P&) { c.theory.k_max = to_size(v); }},
  };
  return table;
}

void validate(ExperimentConfig& c) {
  const ProblemConfig& p = c.problem;
  switch (p.kind) {
    case ProblemKind::gaussian:
      require(p.m > 0 && p.n > 0 && p.blocks > 0, "problem.m, problem.n and problem.blocks must be positive");
      require(p.m % p.blocks == 0, "problem.m must be divisible by problem.blocks");
      break;
    case ProblemKind::tomo2d:
    case ProblemKind::tomo3d:
      require(p.grid >= 8, "problem.grid must be at least 8");
      require(p.views > 0, "problem.views must be positive");
      break;
    case ProblemKind::file:
      require(!p.path.empty(), "problem.path is required for kind = file");
      break;
  }
  require(p.noise_level >= 0.0, "problem.noise_level must be >= 0");
  require(c.run.replicates >= 1, "run.replicates must be at least 1");
  require(c.run.epochs >= 0.0, "run.epochs must be >= 0");
  require(c.run.workers >= 1, "run.workers must be at least 1");
  require(c.output.record_every >= 1, "output.record_every must be at least 1");
  require(c.solver.lambda >= 0.0, "solver.lambda must be >= 0");
  if (!c.output.references_explicit) c.output.references = default_references(p.kind);
  if (c.theory.alpha.empty()) c.theory.alpha = {c.solver.alpha};
}

}  // namespace

std::string_view to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::gaussian: return "gaussian";
    case ProblemKind::tomo2d: return "tomo2d";
    case ProblemKind::tomo3d: return "tomo3d";
    case ProblemKind::file: return "file";
  }
  return "?";
}

std::string_view to_string(ErrorReference ref) {
  switch (ref) {
    case ErrorReference::x_true: return "x_true";
    case ErrorReference::x_ls: return "x_ls";
    case ErrorReference::x_hat: return "x_hat";
  }
  return "?";
}

std::vector<ErrorReference> default_references(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::gaussian: return {ErrorReference::x_hat};
    case ProblemKind::tomo2d:
    case ProblemKind::tomo3d: return {ErrorReference::x_true};
    case ProblemKind::file: return {ErrorReference::x_ls};
  }
  return {};
}

ExperimentConfig parse_config(std::string_view text, std::string_view source,
                              const std::filesystem::path& base_dir) {
  static const std::set<std::string> sections = {"problem", "solver", "run", "output", "sweep", "theory"};
  ExperimentConfig config;
  std::set<std::string> seen;
  std::string section;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) -> ConfigError {
    return ConfigError(std::string(source) + ":" + std::to_string(line_no) + ": " + msg);
  };

  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw fail("malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!sections.count(section)) throw fail("unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw fail("expected 'key = value'");
    if (section.empty()) throw fail("key outside of a section");
    const std::string key = std::string(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const std::string full = section + "." + key;
    const auto it = setters().find(full);
    if (it == setters().end()) throw fail("unknown key '" + key + "' in [" + section + "]");
    if (!seen.insert(full).second) throw fail("duplicate key '" + key + "' in [" + section + "]");
    if (value.empty()) throw fail("missing value for '" + key + "'");
    try {
      it->second(config, value, base_dir);
    } catch (const InvalidArgument& e) {
      throw fail(full + ": " + e.what());
    }
  }
  try {
    validate(config);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string(source) + ": " + e.what());
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string(), path.parent_path());
}

Regularizer make_regularizer(const SolverConfig& config, std::size_t n) {
  if (config.regularizer == RegularizerKind::identity) return Regularizer::identity();
  // Unit upper bidiagonal: L = I - shift * (superdiagonal shift).
  Matrix l = Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i + 1 < l.rows(); ++i) l(i, i + 1) = -config.regularizer_shift;
  return Regularizer::from_factor(std::move(l));
}

SolverOptions make_solver_options(const SolverConfig& config, std::size_t n, std::size_t n_blocks) {
  SolverOptions o;
  o.method = config.method;
  switch (config.schedule) {
    case Schedule::Kind::constant: o.schedule = Schedule::constant(config.alpha); break;
    case Schedule::Kind::ramp:
      o.schedule = Schedule::ramp(config.alpha,
                                  config.ramp_length == 0 ? config.memory + 1 : config.ramp_length);
      break;
    case Schedule::Kind::decay: o.schedule = Schedule::decay(config.alpha, config.decay_exponent); break;
  }
  o.memory = config.memory;
  o.regularizer = make_regularizer(config, n);
  o.lambda = config.lambda;
  o.n_blocks = n_blocks;
  o.lbfgs_memory = config.lbfgs_memory;
  o.inner = config.inner;
  o.lsqr.rel_tolerance = config.lsqr_tolerance;
  o.lsqr.max_iterations = config.lsqr_max_iterations;
  return o;
}

}  // namespace slim
