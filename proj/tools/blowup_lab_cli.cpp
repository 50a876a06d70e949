#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "blowup_lab/config.hpp"
#include "blowup_lab/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for superlinear indefinite elliptic problems"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  for (const auto& name : blowup::subcommands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "configuration file")->required();
    sub->add_option("--out", out_dir, "output directory (overrides [run] output)");
    sub->add_option("--seed", seed, "random seed (overrides [run] seed)");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string subcommand = app.get_subcommands().front()->get_name();

  blowup::ExperimentConfig config;
  try {
    config = blowup::parse_config(config_path);
  } catch (const blowup::HypothesisViolation& e) {
    std::cerr << "config rejected: " << e.what() << "\n";
    return blowup::exit_code::config;
  } catch (const blowup::Error& e) {
    std::cerr << "config rejected: " << e.what() << "\n";
    return blowup::exit_code::config;
  }
  if (seed) {
    config.seed = *seed;
    config.echo["run.seed"] = std::to_string(*seed);
  }
  const std::string dir = out_dir.value_or(config.output);

  try {
    const blowup::RunManifest m = blowup::run(subcommand, config, dir);
    std::cout << subcommand << ": " << m.status << " (" << m.files.size() << " files in " << dir << ")\n";
    if (!m.failure.is_null()) std::cerr << m.failure.dump() << "\n";
    return m.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return blowup::exit_code::other;
  }
}
