// covert_cli: figure sweeps, covertness audit and the default parameter table.

#include "covert/config.hpp"
#include "covert/experiment.hpp"
#include "covert/parallel.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  CLI::App app{"Jamming-aided covert communication: solvers, figure sweeps and detection audit"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::size_t jobs = covert::default_jobs();
  std::optional<std::size_t> quad_order;
  app.add_option("--seed", seed, "Root RNG seed (overrides the config)");
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--quad-order", quad_order, "Gauss-Laguerre order (overrides the config)")->check(CLI::Range(4, 4096));

  auto* run = app.add_subcommand("run", "Run the figures listed in a config file");
  std::string spec_file;
  std::optional<std::string> output_dir;
  std::vector<std::string> figures;
  run->add_option("spec-file", spec_file, "INI experiment config")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--output-dir", output_dir, "Run directory (overrides the config)");
  run->add_option("--figures", figures, "Subset of figure ids to run");

  auto* audit = app.add_subcommand("audit", "Replay a run's solutions through the Monte-Carlo detector");
  std::string run_dir;
  std::optional<std::size_t> trials;
  audit->add_option("run-dir", run_dir, "Directory written by `run`")->required()->check(CLI::ExistingDirectory);
  audit->add_option("--trials", trials, "Monte-Carlo trials per solution (overrides the config)")
      ->check(CLI::Range(std::size_t{1000}, std::size_t{100000000}));

  app.add_subcommand("defaults", "Print the default parameter table");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto spec = covert::load_spec(spec_file);
      if (seed) spec.seed = spec.scenario.seed = *seed;
      if (quad_order) spec.quad_order = *quad_order;
      if (output_dir) spec.output_dir = *output_dir;
      if (!figures.empty()) spec.figures = figures;
      const auto files = covert::run_experiment(spec, jobs, &std::cerr);
      for (const auto& f : files) std::cout << f.string() << "\n";
    } else if (*audit) {
      const auto rows = covert::audit_run(run_dir, jobs, trials, &std::cerr);
      std::size_t failed = 0;
      for (const auto& r : rows) failed += r.report.pass ? 0 : 1;
      std::cout << rows.size() - failed << "/" << rows.size() << " solutions pass; see "
                << (std::filesystem::path(run_dir) / "audit.csv").string() << "\n";
      return failed == 0 ? 0 : 2;
    } else {
      covert::list_defaults(std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
