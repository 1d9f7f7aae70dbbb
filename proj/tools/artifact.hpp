#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "config.hpp"
#include "dexreg/model.hpp"
#include "dexreg/sampler.hpp"

namespace dexreg::cli {

inline constexpr const char* kFitFormat = "dexreg-fit";
inline constexpr int kFitVersion = 1;

// Everything needed to summarize or evaluate a fit without the input CSV.
struct FitArtifact {
  RunConfig config;
  std::vector<std::string> covariate_names;
  Dataset data;
  ChainResult chain;
};

void save_artifact(const std::filesystem::path& path, const FitArtifact& fit);
// Throws FormatError on a wrong tag, version or malformed content.
FitArtifact load_artifact(const std::filesystem::path& path);

}  // namespace dexreg::cli
