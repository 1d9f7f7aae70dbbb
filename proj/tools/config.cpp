#include "config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "csv.hpp"
#include "dexreg/error.hpp"

namespace dexreg::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

std::vector<std::string> parse_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!trim(item).empty()) out.push_back(trim(item));
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

}  // namespace

std::map<std::string, std::string> RunConfig::entries() const {
  std::vector<std::string> weights;
  for (Weight w : grid.weights) weights.push_back(num(w.a));
  return {
      {"family", std::string(family_name(family.id))},
      {"phi", num(family.phi)},
      {"response", response},
      {"trials", trials},
      {"covariates", join(covariates)},
      {"dispersion", dispersion ? "true" : "false"},
      {"interactions", interactions ? "true" : "false"},
      {"selection", selection ? "true" : "false"},
      {"s", num(hyp.s)},
      {"t", num(hyp.t)},
      {"beta0_var", num(hyp.beta0_var)},
      {"ac_prior_var", num(hyp.ac_prior_var)},
      {"p_jtheta", num(hyp.p_Jtheta)},
      {"energy_threshold", num(hyp.energy_threshold)},
      {"iterations", std::to_string(mcmc.iterations)},
      {"burn_in", std::to_string(mcmc.burn_in)},
      {"thin", std::to_string(mcmc.thin)},
      {"seed", std::to_string(mcmc.seed)},
      {"laplace_max_steps", std::to_string(mcmc.laplace_max_steps)},
      {"laplace_grad_tol", num(mcmc.laplace_grad_tol)},
      {"grid", grid_path},
      {"grid_link_mu_min", num(grid.link_mu_min)},
      {"grid_link_mu_max", num(grid.link_mu_max)},
      {"grid_link_mu_step", num(grid.link_mu_step)},
      {"grid_link_theta_min", num(grid.link_theta_min)},
      {"grid_link_theta_max", num(grid.link_theta_max)},
      {"grid_link_theta_step", num(grid.link_theta_step)},
      {"grid_truncation", std::to_string(grid.truncation)},
      {"grid_weights", join(weights)},
      {"out", out},
      {"replicates", std::to_string(replicates)},
  };
}

void RunConfig::set(const std::string& key, const std::string& v) {
  if (key == "family") family.id = parse_family(v);
  else if (key == "phi") family.phi = parse_number<double>(key, v);
  else if (key == "response") response = v;
  else if (key == "trials") trials = v;
  else if (key == "covariates") covariates = parse_list(v);
  else if (key == "dispersion") dispersion = parse_bool(key, v);
  else if (key == "interactions") interactions = parse_bool(key, v);
  else if (key == "selection") selection = parse_bool(key, v);
  else if (key == "s") hyp.s = parse_number<double>(key, v);
  else if (key == "t") hyp.t = parse_number<double>(key, v);
  else if (key == "beta0_var") hyp.beta0_var = parse_number<double>(key, v);
  else if (key == "ac_prior_var") hyp.ac_prior_var = parse_number<double>(key, v);
  else if (key == "p_jtheta") hyp.p_Jtheta = parse_number<double>(key, v);
  else if (key == "energy_threshold") hyp.energy_threshold = parse_number<double>(key, v);
  else if (key == "iterations") mcmc.iterations = parse_number<std::size_t>(key, v);
  else if (key == "burn_in") mcmc.burn_in = parse_number<std::size_t>(key, v);
  else if (key == "thin") mcmc.thin = parse_number<std::size_t>(key, v);
  else if (key == "seed") mcmc.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "laplace_max_steps") mcmc.laplace_max_steps = parse_number<int>(key, v);
  else if (key == "laplace_grad_tol") mcmc.laplace_grad_tol = parse_number<double>(key, v);
  else if (key == "grid") grid_path = v;
  else if (key == "grid_link_mu_min") grid.link_mu_min = parse_number<double>(key, v);
  else if (key == "grid_link_mu_max") grid.link_mu_max = parse_number<double>(key, v);
  else if (key == "grid_link_mu_step") grid.link_mu_step = parse_number<double>(key, v);
  else if (key == "grid_link_theta_min") grid.link_theta_min = parse_number<double>(key, v);
  else if (key == "grid_link_theta_max") grid.link_theta_max = parse_number<double>(key, v);
  else if (key == "grid_link_theta_step") grid.link_theta_step = parse_number<double>(key, v);
  else if (key == "grid_truncation") grid.truncation = parse_number<std::uint32_t>(key, v);
  else if (key == "grid_weights") {
    grid.weights.clear();
    for (const auto& w : parse_list(v)) grid.weights.push_back(Weight{parse_number<double>(key, w)});
  } else if (key == "out") out = v;
  else if (key == "replicates") replicates = parse_number<std::size_t>(key, v);
  else throw ConfigError("unknown configuration key '" + key + "'");
}

ModelStructure RunConfig::structure() const {
  if (!selection) return ModelStructure::no_selection(dispersion, interactions);
  ModelStructure st = dispersion ? ModelStructure{} : ModelStructure::gam();
  if (interactions) st.interactions = IndicatorMode::Free;
  return st;
}

void RunConfig::validate() const {
  if (!(family.phi > 0.0)) throw ConfigError("phi must be positive");
  if (family.id != Family::Gaussian && family.phi != 1.0)
    throw ConfigError("phi is fixed at 1 for the Poisson and binomial families");
  if (response.empty()) throw ConfigError("response column name is empty");
  if (replicates == 0) throw ConfigError("replicates must be at least 1");
  hyp.validate();
  mcmc.validate();
  grid.validate();
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    try {
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace dexreg::cli
