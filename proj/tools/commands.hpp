#pragma once

#include <string>
#include <vector>

#include "config.hpp"

namespace dexreg::cli {

struct Options {
  RunConfig cfg;
  std::string data;   // input CSV
  std::string fit;    // fit artifact
  std::string truth;  // truth CSV: covariates, [trials], eta_mu, eta_theta
  std::vector<std::string> with_selection;
  std::vector<std::string> without_selection;
};

void cmd_grid(const Options& opt);
void cmd_fit(const Options& opt);
void cmd_summarize(const Options& opt);
void cmd_simulate(const Options& opt);
void cmd_evaluate(const Options& opt);

}  // namespace dexreg::cli
