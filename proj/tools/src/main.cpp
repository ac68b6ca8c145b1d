#include "run.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  CLI::App app{"bvflow: vanishing-viscosity limits of gradient flows"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::vector<std::string> overrides;
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (sets BVFLOW_THREADS)")->check(CLI::PositiveNumber);

  const std::map<std::string, std::string> help{
      {"validate", "Check analytic derivatives and coercivity of the energy"},
      {"simulate", "Integrate the viscous flow for each epsilon"},
      {"branches", "Find critical points and continue branches to their folds"},
      {"jump", "Solve the heteroclinic transition from a fold"},
      {"cost", "Pairwise transition costs between points"},
      {"limit", "Build the limiting BV solution"},
      {"compare", "Compare viscous trajectories with the BV limit"},
  };
  for (const auto& name : bvflow::cli::subcommands()) {
    auto* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("overrides", overrides, "key=value overrides");
    sub->add_option("-o,--out", out, "Output directory (overrides output_dir)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : bvflow::cli::config_error;
  }

  if (threads > 0) setenv("BVFLOW_THREADS", std::to_string(threads).c_str(), 1);
  if (!out.empty()) overrides.push_back("output_dir=\"" + out + "\"");
  return bvflow::cli::run(app.get_subcommands().front()->get_name(), config, overrides, std::cerr);
}
