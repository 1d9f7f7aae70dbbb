#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <set>

#include <spdlog/spdlog.h>

#include "artifact.hpp"
#include "csv.hpp"
#include "dexreg/error.hpp"
#include "dexreg/inference.hpp"

namespace dexreg::cli {

namespace fs = std::filesystem;

namespace {

struct LoadedData {
  Dataset data;
  std::vector<std::string> names;
};

bool is_integer(double v) { return std::floor(v) == v; }

// Covariate columns: the configured list, or every column not otherwise used.
std::vector<std::string> covariate_columns(const RunConfig& cfg, const Table& t,
                                           const std::set<std::string>& reserved) {
  if (!cfg.covariates.empty()) {
    for (const auto& c : cfg.covariates) {
      if (reserved.count(c)) throw ConfigError("column '" + c + "' cannot be both a covariate and the response");
      t.column(c);
    }
    return cfg.covariates;
  }
  std::vector<std::string> out;
  for (const auto& h : t.header)
    if (!reserved.count(h)) out.push_back(h);
  return out;
}

// Binomial weights from the trials column; also checks the successes.
std::vector<Weight> binomial_weights(const Table& t, const std::string& trials_col,
                                     const std::vector<double>* successes) {
  if (!t.has(trials_col)) throw ConfigError("binomial data need a trials column ('" + trials_col + "' not found)");
  const auto& n = t.column(trials_col);
  std::vector<Weight> w;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const std::string where = "row " + std::to_string(i + 1) + " (line " + std::to_string(i + 2) + ")";
    if (!is_integer(n[i]) || n[i] < 1) throw DataError(where + ": trials must be a positive integer");
    if (successes) {
      const double s = (*successes)[i];
      if (!is_integer(s) || s < 0 || s > n[i]) throw DataError(where + ": successes must be an integer in [0, trials]");
    }
    w.push_back(Weight{n[i]});
  }
  return w;
}

LoadedData load_data(const RunConfig& cfg, const fs::path& path) {
  const Table t = read_csv(path);
  const bool binomial = cfg.family.id == Family::Binomial;
  if (!binomial && !cfg.trials.empty()) throw ConfigError("a trials column only applies to the binomial family");
  std::set<std::string> reserved{cfg.response};
  if (binomial) reserved.insert(cfg.trials_column());
  const auto& resp = t.column(cfg.response);
  std::vector<double> y = resp;
  std::vector<Weight> w(t.rows());
  if (binomial) {
    w = binomial_weights(t, cfg.trials_column(), &resp);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] /= w[i].a;
  }
  LoadedData out;
  out.names = covariate_columns(cfg, t, reserved);
  std::vector<std::vector<double>> cols;
  for (const auto& c : out.names) cols.push_back(t.column(c));
  out.data = Dataset::build(cfg.family, std::move(y), std::move(w), cols, cfg.hyp.energy_threshold, cfg.interactions);
  return out;
}

std::vector<Weight> distinct_weights(const std::vector<Weight>& w) {
  std::set<double> s;
  for (Weight x : w) s.insert(x.a);
  std::vector<Weight> out;
  for (double a : s) out.push_back(Weight{a});
  return out;
}

// Link-scale means the data make plausible.
std::pair<double, double> data_link_range(const Dataset& d) {
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t i = 0; i < d.n(); ++i) {
    double g = d.y[i];
    if (d.family.id == Family::Poisson) g = std::log(d.y[i] + 0.5);
    if (d.family.id == Family::Binomial) {
      const double p = (d.y[i] * d.weights[i].a + 0.5) / (d.weights[i].a + 1.0);
      g = std::log(p / (1.0 - p));
    }
    lo = std::min(lo, g);
    hi = std::max(hi, g);
  }
  return {lo, hi};
}

std::unique_ptr<Normalizer> make_normalizer(const RunConfig& cfg, const Dataset& d) {
  if (cfg.family.id == Family::Gaussian) return std::make_unique<ExactNormalizer>(cfg.family, cfg.grid.truncation);
  std::unique_ptr<NormalizingGrid> grid;
  if (!cfg.grid_path.empty()) {
    grid = std::make_unique<NormalizingGrid>(load_grid(cfg.grid_path));
    if (grid->family().id != cfg.family.id)
      throw ConfigError("grid " + cfg.grid_path + " was built for the " + std::string(family_name(grid->family().id)) +
                        " family");
    for (Weight w : distinct_weights(d.weights)) try {
        grid->layer_index(w);
      } catch (const GridBoundsError&) {
        throw ConfigError("grid " + cfg.grid_path + " has no layer for " + num(w.a) + " trials");
      }
  } else {
    GridConfig g = cfg.grid;
    g.weights = cfg.family.id == Family::Binomial ? distinct_weights(d.weights) : std::vector<Weight>{Weight{}};
    const auto start = std::chrono::steady_clock::now();
    grid = std::make_unique<NormalizingGrid>(build_grid(cfg.family, g));
    spdlog::info("built the normalizing grid in {:.1f} s",
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  if (d.n() > 0) {
    const auto [lo, hi] = data_link_range(d);
    const auto& g = grid->config();
    const double margin = std::min(lo - g.link_mu_min, g.mu_upper() - hi);
    if (margin < 3.0)
      spdlog::warn("data link range [{:.2f}, {:.2f}] lies within {:.2f} of the grid's mean axis [{}, {}]", lo, hi,
                   margin, g.link_mu_min, g.mu_upper());
  }
  return grid;
}

std::string slug(std::string s) {
  for (auto& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.') c = '_';
  return s;
}

void write_chain_csv(const fs::path& path, const FitArtifact& fit) {
  const auto& names = fit.covariate_names;
  const auto& d = fit.data;
  std::vector<std::string> h{"iteration", "log_likelihood", "beta0_mu", "b_mu", "ac_mu", "bc_mu",
                             "J_theta",   "b_theta",        "ac_theta", "bc_theta", "beta_theta.intercept"};
  for (std::size_t j = 0; j < d.p(); ++j) {
    const auto& nm = names[j];
    for (const char* f : {"beta_mu", "J_mu", "K_mu", "c_mu", "beta_theta", "K_theta", "c_theta"})
      h.push_back(std::string(f) + "." + nm);
    for (std::size_t k = 0; k < d.bases[j].rank(); ++k) h.push_back("alpha_mu." + nm + "." + std::to_string(k + 1));
    for (std::size_t k = 0; k < d.bases[j].rank(); ++k) h.push_back("alpha_theta." + nm + "." + std::to_string(k + 1));
  }
  for (const auto& ib : d.interactions) {
    const std::string pair = names[ib.j] + ":" + names[ib.k];
    h.push_back("K_int." + pair);
    h.push_back("c_int." + pair);
    for (std::size_t k = 0; k < ib.basis.rank(); ++k) h.push_back("alpha_int." + pair + "." + std::to_string(k + 1));
  }
  std::vector<std::vector<std::string>> rows;
  for (std::size_t r = 0; r < fit.chain.states.size(); ++r) {
    const auto& s = fit.chain.states[r];
    std::vector<std::string> row{std::to_string(fit.chain.iterations[r]),
                                 num(fit.chain.log_likelihood[r]),
                                 num(s.beta0_mu),
                                 num(s.b_mu),
                                 num(s.ac_mu),
                                 num(s.bc_mu),
                                 std::to_string(s.J_theta),
                                 num(s.b_theta),
                                 num(s.ac_theta),
                                 num(s.bc_theta),
                                 num(s.beta_theta(0))};
    for (std::size_t j = 0; j < d.p(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      row.insert(row.end(), {num(s.beta_mu(jj)), std::to_string(s.J_mu[j]), std::to_string(s.K_mu[j]),
                             num(s.c_mu(jj)), num(s.beta_theta(jj + 1)), std::to_string(s.K_theta[j]),
                             num(s.c_theta(jj))});
      for (double v : s.alpha_mu[j]) row.push_back(num(v));
      for (double v : s.alpha_theta[j]) row.push_back(num(v));
    }
    for (std::size_t k = 0; k < d.pairs(); ++k) {
      row.push_back(std::to_string(s.K_int[k]));
      row.push_back(num(s.c_int(static_cast<Eigen::Index>(k))));
      for (double v : s.alpha_int[k]) row.push_back(num(v));
    }
    rows.push_back(std::move(row));
  }
  write_csv(path, h, rows);
}

void write_trace_csv(const fs::path& path, const ChainResult& chain) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t r = 0; r < chain.states.size(); ++r)
    rows.push_back({std::to_string(chain.iterations[r]), num(chain.log_likelihood[r])});
  write_csv(path, {"iteration", "log_likelihood"}, rows);
}

// Sample autocorrelation at lags 0..max_lag.
std::vector<double> autocorrelation(const std::vector<double>& v, std::size_t max_lag) {
  const std::size_t n = v.size();
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(n);
  double c0 = 0.0;
  for (double x : v) c0 += (x - m) * (x - m);
  std::vector<double> out;
  for (std::size_t lag = 0; lag <= std::min(max_lag, n ? n - 1 : 0); ++lag) {
    double c = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) c += (v[i] - m) * (v[i + lag] - m);
    out.push_back(c0 > 0.0 ? c / c0 : (lag == 0 ? 1.0 : 0.0));
  }
  return out;
}

struct Truth {
  std::vector<std::string> names;
  std::vector<std::vector<double>> covariates;
  std::vector<Weight> weights;
  std::vector<LinkParams> params;
};

Truth read_truth(const RunConfig& cfg, const fs::path& path) {
  const Table t = read_csv(path);
  Truth tr;
  const auto& em = t.column("eta_mu");
  const auto& et = t.column("eta_theta");
  for (std::size_t i = 0; i < em.size(); ++i) tr.params.push_back({em[i], et[i]});
  std::set<std::string> reserved{"eta_mu", "eta_theta"};
  tr.weights.assign(t.rows(), Weight{});
  if (cfg.family.id == Family::Binomial) {
    reserved.insert(cfg.trials_column());
    tr.weights = binomial_weights(t, cfg.trials_column(), nullptr);
  }
  RunConfig all = cfg;
  all.covariates.clear();
  tr.names = covariate_columns(all, t, reserved);
  for (const auto& c : tr.names) tr.covariates.push_back(t.column(c));
  return tr;
}

void write_truth(const fs::path& path, const RunConfig& cfg, const Truth& tr) {
  std::vector<std::string> h = tr.names;
  const bool binomial = cfg.family.id == Family::Binomial;
  if (binomial) h.push_back(cfg.trials_column());
  h.insert(h.end(), {"eta_mu", "eta_theta"});
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < tr.params.size(); ++i) {
    std::vector<std::string> row;
    for (const auto& c : tr.covariates) row.push_back(num(c[i]));
    if (binomial) row.push_back(num(tr.weights[i].a));
    row.push_back(num(tr.params[i].mu));
    row.push_back(num(tr.params[i].theta));
    rows.push_back(std::move(row));
  }
  write_csv(path, h, rows);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

void cmd_grid(const Options& opt) {
  const RunConfig& cfg = opt.cfg;
  if (cfg.family.id == Family::Gaussian) throw ConfigError("the Gaussian family needs no grid (log Z = 0)");
  GridConfig g = cfg.grid;
  if (cfg.family.id == Family::Binomial && !opt.data.empty()) {
    const Table t = read_csv(opt.data);
    g.weights = distinct_weights(binomial_weights(t, cfg.trials_column(), nullptr));
  } else if (cfg.family.id == Family::Poisson) {
    g.weights = {Weight{}};
  }
  g.validate();
  const NormalizingGrid grid = build_grid(cfg.family, g);
  save_grid(cfg.out, grid);
  const auto slice = grid.theta_one_slice_max_abs();
  std::printf("grid: %s, %zu weight layer(s) x %zu mean x %zu dispersion nodes\n",
              std::string(family_name(cfg.family.id)).c_str(), g.weights.size(), g.mu_points(), g.theta_points());
  if (slice) std::printf("max |log Z| on the theta = 1 slice: %.3g\n", *slice);
  if (grid.unconverged_nodes())
    std::printf("nodes whose Poisson sum reached the truncation point: %zu\n", grid.unconverged_nodes());
  std::printf("written to %s\n", cfg.out.c_str());
}

void cmd_fit(const Options& opt) {
  if (opt.data.empty()) throw ConfigError("fit needs --data");
  const RunConfig& cfg = opt.cfg;
  auto loaded = load_data(cfg, opt.data);
  const auto norm = make_normalizer(cfg, loaded.data);
  const auto start = std::chrono::steady_clock::now();
  FitArtifact fit{cfg, loaded.names, std::move(loaded.data), {}};
  fit.chain = run_chain(fit.data, *norm, cfg.hyp, cfg.structure(), cfg.mcmc);
  spdlog::info("{} sweeps in {:.1f} s", cfg.mcmc.burn_in + cfg.mcmc.iterations,
               std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  for (std::size_t k = 0; k < kStepCount; ++k) {
    const auto& st = fit.chain.stats[k];
    if (st.proposed)
      spdlog::info("{:<22} acceptance {:.3f} ({} proposals, {} skipped)", step_name(static_cast<Step>(k)), st.rate(),
                   st.proposed, st.skipped);
  }
  const fs::path out(cfg.out);
  ensure_dir(out);
  save_artifact(out / "fit.json", fit);
  write_chain_csv(out / "chain.csv", fit);
  write_trace_csv(out / "trace.csv", fit.chain);
  if (!fit.chain.states.empty())
    std::printf("posterior P(dispersion model) = %.3f; outputs in %s\n",
                effect_probabilities(fit.chain.states).dispersion_model, out.c_str());
}

void cmd_summarize(const Options& opt) {
  if (opt.fit.empty()) throw ConfigError("summarize needs --fit");
  const FitArtifact fit = load_artifact(opt.fit);
  if (fit.chain.states.empty()) throw DataError("the fit has no retained states");
  const fs::path out(opt.cfg.out);
  ensure_dir(out);
  const auto& d = fit.data;
  const auto table = effect_probabilities(fit.chain.states);

  std::vector<std::vector<std::string>> rows;
  for (std::size_t j = 0; j < d.p(); ++j) {
    for (auto [side, e] : {std::pair{"mean", table.mean[j]}, std::pair{"dispersion", table.dispersion[j]}})
      rows.push_back({fit.covariate_names[j], side, num(e.null), num(e.linear), num(e.flexible)});
  }
  write_csv(out / "effects.csv", {"covariate", "side", "p_null", "p_linear", "p_flexible"}, rows);

  rows.clear();
  for (std::size_t k = 0; k < d.pairs(); ++k)
    rows.push_back({fit.covariate_names[d.interactions[k].j], fit.covariate_names[d.interactions[k].k],
                    num(table.interaction[k])});
  write_csv(out / "interactions.csv", {"covariate_a", "covariate_b", "p_interaction"}, rows);

  rows = {{"retained_states", std::to_string(fit.chain.states.size())},
          {"p_dispersion_model", num(table.dispersion_model)}};
  for (std::size_t k = 0; k < kStepCount; ++k) {
    const auto& st = fit.chain.stats[k];
    if (st.proposed) rows.push_back({"acceptance." + std::string(step_name(static_cast<Step>(k))), num(st.rate())});
  }
  write_csv(out / "summary.csv", {"quantity", "value"}, rows);

  for (std::size_t j = 0; j < d.p(); ++j) {
    const auto xs = curve_abscissae(d.covariates[j]);
    for (auto [side, name] : {std::pair{Side::Mean, "mean"}, std::pair{Side::Dispersion, "dispersion"}}) {
      const auto c = fitted_curve(fit.chain.states, d, side, j, xs);
      rows.clear();
      for (std::size_t q = 0; q < c.x.size(); ++q)
        rows.push_back({num(c.x[q]), num(c.mean[q]), num(c.lower[q]), num(c.upper[q])});
      write_csv(out / ("curve_" + std::string(name) + "_" + slug(fit.covariate_names[j]) + ".csv"),
                {"x", "mean", "lower", "upper"}, rows);
    }
  }

  write_trace_csv(out / "trace.csv", fit.chain);
  const auto acf = autocorrelation(fit.chain.log_likelihood, 50);
  rows.clear();
  for (std::size_t lag = 0; lag < acf.size(); ++lag) rows.push_back({std::to_string(lag), num(acf[lag])});
  write_csv(out / "autocorrelation.csv", {"lag", "log_likelihood"}, rows);
  std::printf("summaries written to %s\n", out.c_str());
}

void cmd_simulate(const Options& opt) {
  RunConfig cfg = opt.cfg;
  Truth tr;
  if (!opt.fit.empty()) {
    const FitArtifact fit = load_artifact(opt.fit);
    if (fit.chain.states.empty()) throw DataError("the fit has no retained states");
    cfg.family = fit.data.family;
    cfg.response = fit.config.response;
    cfg.trials = fit.config.trials;
    const auto& d = fit.data;
    tr.names = fit.covariate_names;
    for (const auto& c : d.covariates) tr.covariates.push_back(c.raw);
    tr.weights = d.weights;
    // Posterior mean of the two linear predictors.
    Eigen::VectorXd em = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.n())), et = em;
    for (const auto& s : fit.chain.states) {
      em += linear_predictor_mean(s, d);
      et += linear_predictor_dispersion(s, d);
    }
    const double k = static_cast<double>(fit.chain.states.size());
    for (std::size_t i = 0; i < d.n(); ++i)
      tr.params.push_back({em(static_cast<Eigen::Index>(i)) / k, et(static_cast<Eigen::Index>(i)) / k});
  } else if (!opt.truth.empty()) {
    tr = read_truth(cfg, opt.truth);
  } else {
    throw ConfigError("simulate needs --fit or --truth");
  }
  const fs::path out(cfg.out);
  ensure_dir(out);
  write_truth(out / "truth.csv", cfg, tr);

  const bool binomial = cfg.family.id == Family::Binomial;
  std::vector<std::string> h = tr.names;
  h.push_back(cfg.response);
  if (binomial) h.push_back(cfg.trials_column());
  for (std::size_t r = 0; r < cfg.replicates; ++r) {
    Rng rng(derive_seed(cfg.mcmc.seed, r));
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < tr.params.size(); ++i) {
      double y = draw_double(cfg.family, tr.params[i].mu, tr.params[i].theta, tr.weights[i], rng, cfg.grid.truncation);
      std::vector<std::string> row;
      for (const auto& c : tr.covariates) row.push_back(num(c[i]));
      if (binomial) y = std::round(y * tr.weights[i].a);
      row.push_back(num(y));
      if (binomial) row.push_back(num(tr.weights[i].a));
      rows.push_back(std::move(row));
    }
    char name[32];
    std::snprintf(name, sizeof name, "replicate_%03zu.csv", r + 1);
    write_csv(out / name, h, rows);
  }
  std::printf("%zu replicate(s) of %zu observations written to %s\n", cfg.replicates, tr.params.size(), out.c_str());
}

void cmd_evaluate(const Options& opt) {
  if (opt.truth.empty()) throw ConfigError("evaluate needs --truth");
  if (opt.with_selection.empty()) throw ConfigError("evaluate needs fits given with --with");
  if (opt.with_selection.size() != opt.without_selection.size())
    throw DataError("mismatched replicate sets: " + std::to_string(opt.with_selection.size()) + " fits with selection, " +
                    std::to_string(opt.without_selection.size()) + " without");
  const Truth tr = read_truth(opt.cfg, opt.truth);
  const ExactNormalizer norm(opt.cfg.family, opt.cfg.grid.truncation);

  auto check = [&](const FitArtifact& fit, const std::string& path) {
    const auto& d = fit.data;
    if (d.family.id != opt.cfg.family.id) throw DataError(path + ": family differs from the truth");
    if (d.n() != tr.params.size()) throw DataError(path + ": number of observations differs from the truth");
    if (fit.covariate_names != tr.names) throw DataError(path + ": covariates differ from the truth");
    for (std::size_t j = 0; j < d.p(); ++j)
      if (d.covariates[j].raw != tr.covariates[j]) throw DataError(path + ": covariate values differ from the truth");
    if (d.weights != tr.weights) throw DataError(path + ": trials differ from the truth");
    if (fit.chain.states.empty()) throw DataError(path + ": the fit has no retained states");
  };

  std::vector<double> sel, nosel, ap;
  std::vector<std::vector<std::string>> rows;
  for (std::size_t r = 0; r < opt.with_selection.size(); ++r) {
    const FitArtifact a = load_artifact(opt.with_selection[r]);
    const FitArtifact b = load_artifact(opt.without_selection[r]);
    check(a, opt.with_selection[r]);
    check(b, opt.without_selection[r]);
    sel.push_back(akld(a.chain.states, a.data, norm, tr.params, opt.cfg.grid.truncation));
    nosel.push_back(akld(b.chain.states, b.data, norm, tr.params, opt.cfg.grid.truncation));
    ap.push_back(apkl(nosel.back(), sel.back()));
    rows.push_back({std::to_string(r + 1), num(sel.back()), num(nosel.back()), num(ap.back())});
    spdlog::info("replicate {}: AKLD {:.5f} with selection, {:.5f} without, APKL {:.4f}", r + 1, sel.back(),
                 nosel.back(), ap.back());
  }
  for (int pct : {10, 25, 50, 75, 90}) {
    const double q = pct / 100.0;
    rows.push_back({"p" + std::to_string(pct), num(quantile(sel, q)), num(quantile(nosel, q)), num(quantile(ap, q))});
  }
  const fs::path out(opt.cfg.out);
  ensure_dir(out);
  write_csv(out / "metrics.csv", {"replicate", "akld_selection", "akld_no_selection", "apkl"}, rows);
  std::printf("median APKL %.4f over %zu replicate(s); metrics in %s\n", quantile(ap, 0.5), ap.size(),
              (out / "metrics.csv").c_str());
}

}  // namespace dexreg::cli
