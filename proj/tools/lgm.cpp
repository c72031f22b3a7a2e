#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lgm/app.hpp"
#include "lgm/errors.hpp"
#include "lgm/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Spatial latent Gaussian models: simulate, fit, predict, compare"};
  app.set_version_flag("--version", std::string(lgm::kVersion));
  app.require_subcommand(1);

  lgm::RunConfig rc;

  auto add_common = [&rc](CLI::App* cmd) {
    cmd->add_option("--config", rc.config_path, "configuration file");
    cmd->add_option("--out", rc.out_dir, "output directory");
    cmd->add_option("--seed", rc.seed, "random seed (overrides config)");
    cmd->add_option("--threads", rc.threads, "worker thread bound");
    cmd->add_option("--draws", rc.draws, "posterior draw count");
  };

  CLI::App* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  add_common(sim);
  sim->add_option("--graph", rc.graph_path, "use an existing adjacency file");

  CLI::App* fit = app.add_subcommand("fit", "fit a model and write artifacts");
  add_common(fit);
  fit->add_option("--data", rc.data_path, "dataset CSV")->required();
  fit->add_option("--graph", rc.graph_path, "region adjacency file")->required();

  CLI::App* pred = app.add_subcommand("predict", "predict from stored fit artifacts");
  add_common(pred);
  pred->add_option("--fit", rc.fit_dir, "fit artifact directory")->required();
  pred->add_option("--profiles", rc.profiles_path, "covariate profile CSV")->required();
  pred->add_flag("--plugin", rc.plugin, "plug-in at posterior means instead of draws");

  CLI::App* cmp = app.add_subcommand("compare", "tabulate scores across fits");
  cmp->add_option("--out", rc.out_dir, "output directory for comparison.csv");
  cmp->add_option("fits", rc.compare_dirs, "fit artifact directories")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) lgm::cmd_simulate(rc);
    if (fit->parsed()) lgm::cmd_fit(rc);
    if (pred->parsed()) lgm::cmd_predict(rc);
    if (cmp->parsed()) lgm::cmd_compare(rc);
  } catch (const lgm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
