// slim: run, sweep, stream, verify-theory and gen-problem from a config file.
//
// Exit status: 0 success, 1 invalid input or runtime error, 2 every
// replicate diverged, 3 a theory inequality failed.

#include "slim/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

constexpr int kInvalid = 1;
constexpr int kAllDiverged = 2;
constexpr int kTheoryFailed = 3;

int report_run(const slim::ExperimentResult& r, const slim::ExperimentConfig& c) {
  std::cout << "iterations " << r.iterations << ", replicates " << r.replicates << ", diverged "
            << r.diverged << "\n";
  std::cout << "wrote " << c.output.path.string() << "_metrics.csv and "
            << c.output.path.string() << "_aggregate.csv\n";
  return r.diverged == r.replicates ? kAllDiverged : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Limited-memory row-action least-squares solvers"};
  app.require_subcommand(1);

  std::string config_path;
  std::string axis_name;
  std::string output_override;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--output", output_override, "output path prefix (overrides [output] path)");
  };
  auto* run_cmd = app.add_subcommand("run", "run replicates and write metrics/aggregate CSVs");
  add_config(run_cmd);
  auto* sweep_cmd = app.add_subcommand("sweep", "run one experiment per grid value");
  add_config(sweep_cmd);
  sweep_cmd->add_option("--axis", axis_name, "alpha, memory or method")->required();
  auto* stream_cmd = app.add_subcommand("stream", "single pass over the blocks in arrival order");
  add_config(stream_cmd);
  auto* theory_cmd = app.add_subcommand("verify-theory", "exact convergence-theory report");
  add_config(theory_cmd);
  auto* gen_cmd = app.add_subcommand("gen-problem", "write the problem as a streamed-matrix file");
  add_config(gen_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kInvalid;
  }

  try {
    slim::ExperimentConfig config = slim::load_config(config_path);
    if (!output_override.empty()) config.output.path = output_override;

    if (run_cmd->parsed()) {
      return report_run(slim::run_and_write(config), config);
    }
    if (sweep_cmd->parsed()) {
      const slim::SweepAxis axis = slim::parse_sweep_axis(axis_name);
      const auto points = slim::sweep(config, axis, true);
      slim::write_sweep_summary(std::cout, axis, points);
      bool all_diverged = true;
      for (const auto& p : points) all_diverged = all_diverged && p.result.diverged == p.result.replicates;
      return all_diverged ? kAllDiverged : 0;
    }
    if (stream_cmd->parsed()) {
      const slim::StreamResult r = slim::stream_demo(config, true);
      std::cout << "consumed " << r.consumed << " blocks, wrote " << config.output.path.string()
                << "_stream.csv\n";
      return r.status == slim::RunStatus::diverged ? kAllDiverged : 0;
    }
    if (theory_cmd->parsed()) {
      const bool ok = slim::verify_theory(config);
      std::cout << "wrote " << config.output.path.string() << "_theory.csv; "
                << (ok ? "all inequalities hold" : "some inequalities FAIL") << "\n";
      return ok ? 0 : kTheoryFailed;
    }
    if (gen_cmd->parsed()) {
      slim::gen_problem(config);
      std::cout << "wrote " << config.output.path.string() << ".slim\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "slim: " << e.what() << "\n";
    return kInvalid;
  }
  return 0;
}
