#include "dexreg/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <spdlog/spdlog.h>

#include "dexreg/error.hpp"

namespace dexreg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(std::span<const double> v) {
  double m = -kInf;
  for (double x : v) m = std::max(m, x);
  if (m == -kInf) return -kInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// log double density at link-scale parameters with a precomputed log Z.
double log_double_at(const ExponentialFamily& fam, double y, LinkParams p, double log_z, double log_sat, Weight w) {
  const double theta = std::exp(p.theta);
  return log_z + 0.5 * p.theta + theta * log_density_natural(fam, y, p.mu, w) + (1.0 - theta) * log_sat;
}

}  // namespace

EffectTable effect_probabilities(std::span<const ModelState> chain) {
  if (chain.empty()) throw DomainError("effect probabilities need a non-empty chain");
  const std::size_t p = chain.front().p();
  const std::size_t pairs = chain.front().K_int.size();
  EffectTable t;
  t.mean.resize(p);
  t.dispersion.resize(p);
  t.interaction.assign(pairs, 0.0);
  auto add = [](EffectProbabilities& e, EffectKind k) {
    switch (k) {
      case EffectKind::Null: e.null += 1.0; break;
      case EffectKind::Linear: e.linear += 1.0; break;
      case EffectKind::Flexible: e.flexible += 1.0; break;
    }
  };
  for (const auto& s : chain) {
    if (s.p() != p || s.K_int.size() != pairs) throw DomainError("chain states differ in shape");
    for (std::size_t j = 0; j < p; ++j) {
      add(t.mean[j], effect_kind_mean(s, j));
      add(t.dispersion[j], effect_kind_dispersion(s, j));
    }
    for (std::size_t k = 0; k < pairs; ++k) t.interaction[k] += s.K_int[k];
    t.dispersion_model += s.J_theta;
  }
  const double n = static_cast<double>(chain.size());
  for (auto* side : {&t.mean, &t.dispersion})
    for (auto& e : *side) {
      e.null /= n;
      e.linear /= n;
      e.flexible /= n;
    }
  for (auto& v : t.interaction) v /= n;
  t.dispersion_model /= n;
  return t;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<double> curve_abscissae(const RescaledCovariate& cov, std::size_t points) {
  if (points < 2) throw DomainError("a curve needs at least two points");
  std::vector<double> x(points);
  for (std::size_t i = 0; i < points; ++i)
    x[i] = cov.from_unit(static_cast<double>(i) / static_cast<double>(points - 1));
  return x;
}

CurveSummary fitted_curve(std::span<const ModelState> chain, const Dataset& data, Side side, std::size_t j,
                          std::span<const double> abscissae) {
  if (chain.empty()) throw DomainError("curve summary needs a non-empty chain");
  if (j >= data.p()) throw DomainError("covariate index out of range");
  const auto jj = static_cast<Eigen::Index>(j);
  const auto& cov = data.covariates[j];
  const std::size_t a = abscissae.size();
  std::vector<std::vector<double>> draws(a, std::vector<double>(chain.size()));
  std::vector<double> xs(a);
  for (std::size_t q = 0; q < a; ++q) xs[q] = cov.to_standardized(abscissae[q]);
  for (std::size_t s = 0; s < chain.size(); ++s) {
    const ModelState& st = chain[s];
    double slope = 0.0;
    const Eigen::VectorXd* alpha = nullptr;
    if (side == Side::Mean) {
      if (st.J_mu[j]) slope = st.beta_mu(jj);
      if (st.K_mu[j]) alpha = &st.alpha_mu[j];
    } else if (st.J_theta) {
      slope = st.beta_theta(jj + 1);
      if (st.K_theta[j]) alpha = &st.alpha_theta[j];
    }
    std::vector<double> smooth;
    if (alpha) smooth = predict_at(data.bases[j], cov, *alpha, abscissae);
    for (std::size_t q = 0; q < a; ++q) draws[q][s] = slope * xs[q] + (alpha ? smooth[q] : 0.0);
  }
  CurveSummary out;
  out.x.assign(abscissae.begin(), abscissae.end());
  for (std::size_t q = 0; q < a; ++q) {
    double m = 0.0;
    for (double v : draws[q]) m += v;
    out.mean.push_back(m / static_cast<double>(chain.size()));
    out.lower.push_back(quantile(draws[q], 0.025));
    out.upper.push_back(quantile(draws[q], 0.975));
  }
  return out;
}

double log_z_with_fallback(const ExponentialFamily& fam, const Normalizer& norm, double link_mu,
                           double link_theta, Weight w, std::uint32_t truncation) {
  if (const auto t = norm.terms(link_mu, link_theta, w)) return t->value;
  return brute_force_terms(fam, link_mu, link_theta, w, truncation).terms.value;
}

double predictive_density(std::span<const ModelState> chain, const Dataset& data, const Normalizer& norm,
                          std::span<const double> x_raw, double y, Weight w) {
  if (chain.empty()) throw DomainError("predictive density needs a non-empty chain");
  const auto& fam = data.family;
  fam.check_support(y, w);
  const double log_sat = log_saturated_density(fam, y, w);
  std::vector<double> terms;
  terms.reserve(chain.size());
  for (const auto& s : chain) {
    const auto [em, et] = linear_predictors_at(s, data, x_raw);
    const double lz = log_z_with_fallback(fam, norm, em, et, w);
    terms.push_back(log_double_at(fam, y, {em, et}, lz, log_sat, w));
  }
  return std::exp(log_sum_exp(terms) - std::log(static_cast<double>(chain.size())));
}

double kl_divergence(std::span<const double> p_true, std::span<const double> p_hat) {
  if (p_true.size() != p_hat.size()) throw DomainError("KL supports differ in length");
  double kl = 0.0;
  for (std::size_t i = 0; i < p_true.size(); ++i) {
    if (p_true[i] < 0.0 || p_hat[i] < 0.0) throw DomainError("probabilities must be non-negative");
    if (p_true[i] == 0.0) continue;
    if (p_hat[i] == 0.0) return kInf;
    kl += p_true[i] * std::log(p_true[i] / p_hat[i]);
  }
  return std::max(kl, 0.0);
}

double kl_divergence(const std::function<double(double)>& log_p_true,
                     const std::function<double(double)>& log_p_hat, double lo, double hi) {
  bool infinite = false;
  auto integrand = [&](double y) {
    const double lp = log_p_true(y);
    if (lp == -kInf) return 0.0;
    const double lq = log_p_hat(y);
    if (lq == -kInf) {
      infinite = true;
      return 0.0;
    }
    return std::exp(lp) * (lp - lq);
  };
  const double kl = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, lo, hi, 15, 1e-12);
  if (infinite) return kInf;
  return std::max(kl, 0.0);
}

double kl_to_predictive(const ExponentialFamily& fam, Weight w, LinkParams truth,
                        std::span<const LinkParams> fitted, const Normalizer& norm, std::uint32_t truncation) {
  if (fitted.empty()) throw DomainError("KL needs at least one fitted state");
  std::vector<double> fitted_lz(fitted.size());
  for (std::size_t s = 0; s < fitted.size(); ++s)
    fitted_lz[s] = log_z_with_fallback(fam, norm, fitted[s].mu, fitted[s].theta, w, truncation);
  const double log_s = std::log(static_cast<double>(fitted.size()));
  std::vector<double> terms(fitted.size());
  auto log_p_hat = [&](double y) {
    const double ls = log_saturated_density(fam, y, w);
    for (std::size_t s = 0; s < fitted.size(); ++s) terms[s] = log_double_at(fam, y, fitted[s], fitted_lz[s], ls, w);
    return log_sum_exp(terms) - log_s;
  };

  if (fam.id == Family::Gaussian) {
    const double sd = std::sqrt(fam.phi / (w.a * std::exp(truth.theta)));
    auto log_p_true = [&](double y) {
      return log_double_at(fam, y, truth, 0.0, log_saturated_density(fam, y, w), w);
    };
    return kl_divergence(log_p_true, log_p_hat, truth.mu - 12.0 * sd, truth.mu + 12.0 * sd);
  }

  const double true_lz = brute_force_terms(fam, truth.mu, truth.theta, w, truncation).terms.value;
  double kl = 0.0, mass = 0.0;
  auto add = [&](double y) {
    const double lp = log_double_at(fam, y, truth, true_lz, log_saturated_density(fam, y, w), w);
    const double p = std::exp(lp);
    mass += p;
    if (p > 0.0) kl += p * (lp - log_p_hat(y));
  };
  if (fam.id == Family::Binomial) {
    const auto n = static_cast<std::uint32_t>(std::lround(w.a));
    for (std::uint32_t k = 0; k <= n; ++k) add(static_cast<double>(k) / w.a);
    return std::max(kl, 0.0);
  }
  const double mu = std::exp(truth.mu);
  const double sd = std::sqrt(mu / std::exp(truth.theta));
  double y = 0.0;
  if (mu >= 10.0 * sd + 10.0) y = std::floor(std::max(0.0, mu - 14.0 * sd - 10.0));
  for (; y <= static_cast<double>(truncation); y += 1.0) {
    add(y);
    if (y > mu && 1.0 - mass < 1e-12) break;
  }
  if (1.0 - mass > 1e-8)
    throw NumericalError("true mass beyond the truncation point exceeds 1e-8 (mu = " + std::to_string(mu) + ")");
  return std::max(kl, 0.0);
}

double akld(std::span<const ModelState> chain, const Dataset& data, const Normalizer& norm,
            std::span<const LinkParams> truth, std::uint32_t truncation) {
  if (chain.empty()) throw DomainError("AKLD needs a non-empty chain");
  if (truth.size() != data.n()) throw DomainError("true model and data differ in size");
  if (data.n() == 0) throw DomainError("AKLD needs at least one observation");
  std::vector<Eigen::VectorXd> em(chain.size()), et(chain.size());
  for (std::size_t s = 0; s < chain.size(); ++s) {
    em[s] = linear_predictor_mean(chain[s], data);
    et[s] = linear_predictor_dispersion(chain[s], data);
  }
  std::vector<LinkParams> fitted(chain.size());
  double total = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t s = 0; s < chain.size(); ++s) fitted[s] = {em[s](ii), et[s](ii)};
    total += kl_to_predictive(data.family, data.weights[i], truth[i], fitted, norm, truncation);
  }
  return total / static_cast<double>(data.n());
}

double apkl(double akld_no_selection, double akld_selection) {
  if (akld_selection == 0.0) {
    if (akld_no_selection == 0.0) return 0.0;
    spdlog::warn("APKL undefined: AKLD with selection is 0 and without selection is {}", akld_no_selection);
    return kInf;
  }
  return (akld_no_selection - akld_selection) / akld_selection;
}

}  // namespace dexreg
