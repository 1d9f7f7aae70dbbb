#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dexreg/dexp.hpp"
#include "dexreg/expfam.hpp"
#include "dexreg/model.hpp"
#include "dexreg/sampler.hpp"

namespace dexreg::cli {

struct RunConfig {
  ExponentialFamily family;
  std::string response = "y";
  std::string trials;                   // binomial successes are in `response`
  std::vector<std::string> covariates;  // empty: every other column
  bool dispersion = true;
  bool interactions = false;
  bool selection = true;
  Hyperparameters hyp;
  McmcConfig mcmc;
  std::string grid_path;
  GridConfig grid;
  std::string out = "out";
  std::size_t replicates = 10;

  // Flat key = value form, sorted by key.
  std::map<std::string, std::string> entries() const;
  // Throws ConfigError on an unknown key or a malformed value.
  void set(const std::string& key, const std::string& value);

  ModelStructure structure() const;
  std::string trials_column() const { return trials.empty() ? "trials" : trials; }
  void validate() const;  // throws ConfigError
};

// Lines of `key = value`; blank lines and text after '#' are ignored.
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

}  // namespace dexreg::cli
