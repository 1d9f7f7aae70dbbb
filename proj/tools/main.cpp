#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "dexreg/error.hpp"

using namespace dexreg;
using namespace dexreg::cli;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kNumerical = 4 };

struct Flags {
  std::string config;
  std::optional<std::string> family;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> iters;
  std::optional<std::size_t> burnin;
  std::optional<std::size_t> replicates;
  std::optional<std::string> grid;
  std::optional<std::string> out;
  bool interactions = false;
  bool no_dispersion = false;
  bool no_selection = false;
  bool quiet = false;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "flat key = value configuration file");
  sub->add_option("--family", f.family, "poisson, binomial or gaussian");
  sub->add_option("--seed", f.seed, "master seed");
  sub->add_option("--out", f.out, "output directory (grid: output file)");
  sub->add_flag("--quiet", f.quiet, "only report warnings and errors");
}

// Defaults, then the config file, then flags.
RunConfig resolve(const Flags& f) {
  RunConfig cfg;
  if (!f.config.empty()) apply_config_file(cfg, f.config);
  if (f.family) cfg.set("family", *f.family);
  if (f.seed) cfg.mcmc.seed = *f.seed;
  if (f.iters) cfg.mcmc.iterations = *f.iters;
  if (f.burnin) cfg.mcmc.burn_in = *f.burnin;
  if (f.replicates) cfg.replicates = *f.replicates;
  if (f.grid) cfg.grid_path = *f.grid;
  if (f.out) cfg.out = *f.out;
  if (f.interactions) cfg.interactions = true;
  if (f.no_dispersion) cfg.dispersion = false;
  if (f.no_selection) cfg.selection = false;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian semiparametric double exponential regression"};
  app.require_subcommand(1);
  Flags f;
  Options opt;

  auto* grid = app.add_subcommand("grid", "tabulate log Z for a family");
  add_common(grid, f);
  grid->add_option("--data", opt.data, "CSV whose trials column sets the binomial weight layers");

  auto* fit = app.add_subcommand("fit", "run the sampler on a CSV dataset");
  add_common(fit, f);
  fit->add_option("--data", opt.data, "input CSV with a header row")->required();
  fit->add_option("--iters", f.iters, "retained sweeps after burn-in");
  fit->add_option("--burnin", f.burnin, "burn-in sweeps");
  fit->add_option("--grid", f.grid, "precomputed grid file");
  fit->add_flag("--interactions", f.interactions, "include pairwise interaction terms");
  fit->add_flag("--no-dispersion", f.no_dispersion, "fix the dispersion model off (theta = 1)");
  fit->add_flag("--no-selection", f.no_selection, "fix every indicator on");

  auto* summarize = app.add_subcommand("summarize", "effect table, curves and trace data from a fit");
  add_common(summarize, f);
  summarize->add_option("--fit", opt.fit, "fit artifact (fit.json)")->required();

  auto* simulate = app.add_subcommand("simulate", "replicate datasets from a fit or a truth file");
  add_common(simulate, f);
  simulate->add_option("--fit", opt.fit, "fit artifact; simulates at its posterior mean predictors");
  simulate->add_option("--truth", opt.truth, "truth CSV: covariates, [trials], eta_mu, eta_theta");
  simulate->add_option("--replicates", f.replicates, "number of replicate datasets");

  auto* evaluate = app.add_subcommand("evaluate", "AKLD and APKL of paired fits against a truth file");
  add_common(evaluate, f);
  evaluate->add_option("--truth", opt.truth, "truth CSV")->required();
  evaluate->add_option("--with", opt.with_selection, "fits with selection, one per replicate")->required();
  evaluate->add_option("--without", opt.without_selection, "fits without selection, in the same order")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    spdlog::set_level(f.quiet ? spdlog::level::warn : spdlog::level::info);
    opt.cfg = resolve(f);
    if (grid->parsed()) cmd_grid(opt);
    if (fit->parsed()) cmd_fit(opt);
    if (summarize->parsed()) cmd_summarize(opt);
    if (simulate->parsed()) cmd_simulate(opt);
    if (evaluate->parsed()) cmd_evaluate(opt);
  } catch (const ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return kConfig;
  } catch (const DataError& e) {
    spdlog::error("data error: {}", e.what());
    return kData;
  } catch (const FormatError& e) {
    spdlog::error("data error: {}", e.what());
    return kData;
  } catch (const DomainError& e) {
    spdlog::error("data error: {}", e.what());
    return kData;
  } catch (const NumericalError& e) {
    spdlog::error("numerical abort: {}", e.what());
    return kNumerical;
  } catch (const GridBoundsError& e) {
    spdlog::error("numerical abort: {}", e.what());
    return kNumerical;
  } catch (const InvariantError& e) {
    spdlog::error("numerical abort: {}", e.what());
    return kNumerical;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kFailure;
  }
  return kOk;
}
