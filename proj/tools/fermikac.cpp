#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "fermikac/errors.hpp"
#include "fermikac/harness.hpp"

int main(int argc, char** argv) {
  using namespace fermikac;
  CLI::App app{"Exclusion-constrained Kac particle simulator and Uehling-Uhlenbeck solver"};
  std::string experiment;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool check = false;
  app.add_option("experiment", experiment, "relax | converge | chaos | hierarchy-check | uu-solve")
      ->required();
  app.add_option("--config", config_path, "key = value configuration file")->required();
  app.add_option("--seed", seed, "master seed (overrides sim.seed)");
  app.add_option("--out", out, "output directory (overrides out_dir)");
  app.add_flag("--check", check, "exit with status 4 if the experiment verdict fails");
  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = ExperimentConfig::from_flat(FlatConfig::load(config_path));
    cfg.experiment = experiment_from_string(experiment);
    if (seed) cfg.sim.seed = *seed;
    if (!out.empty()) cfg.out_dir = out;
    cfg.validate();
    if (!cfg.out_dir.empty()) {
      std::filesystem::create_directories(cfg.out_dir);
      std::ofstream(std::filesystem::path(cfg.out_dir) / "config.txt") << cfg.to_flat().serialize();
    }
    const RunSummary summary = run_experiment(cfg);
    std::cout << summary.to_json() << '\n';
    if (check && !summary.passed) {
      std::cerr << "check failed: " << summary.experiment << '\n';
      return 4;
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const SaturationError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
