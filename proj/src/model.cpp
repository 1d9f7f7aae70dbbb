#include "dexreg/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "dexreg/error.hpp"

namespace dexreg {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double log_normal(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

// log N(v; 0, var·I)
double log_normal_iso(const Eigen::VectorXd& v, double var) {
  const auto m = static_cast<double>(v.size());
  return -0.5 * (m * (kLog2Pi + std::log(var)) + v.squaredNorm() / var);
}

void fail(const std::string& what) { throw InvariantError(what); }

bool vec_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && (a.size() == 0 || a == b);
}

bool vecs_equal(const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (!vec_equal(a[k], b[k])) return false;
  return true;
}

std::uint8_t fixed_value(IndicatorMode m) { return m == IndicatorMode::FixedOn ? 1 : 0; }

std::vector<std::uint8_t> bernoulli_block(std::size_t count, IndicatorMode mode, Rng& rng) {
  std::vector<std::uint8_t> z(count, fixed_value(mode));
  if (mode == IndicatorMode::Free && count > 0) {
    const double pi = draw_uniform(rng);
    for (auto& e : z) e = draw_bernoulli(rng, pi) ? 1 : 0;
  }
  return z;
}

// Structural checks that need no data.
void check_state_shape(const ModelState& s) {
  const std::size_t p = s.p();
  if (static_cast<std::size_t>(s.beta_mu.size()) != p || s.K_mu.size() != p ||
      s.alpha_mu.size() != p || static_cast<std::size_t>(s.c_mu.size()) != p ||
      static_cast<std::size_t>(s.beta_theta.size()) != p + 1 || s.K_theta.size() != p ||
      s.alpha_theta.size() != p || static_cast<std::size_t>(s.c_theta.size()) != p)
    fail("state blocks have inconsistent lengths");
  if (s.alpha_int.size() != s.K_int.size() || static_cast<std::size_t>(s.c_int.size()) != s.K_int.size())
    fail("interaction blocks have inconsistent lengths");
  for (double v : {s.b_mu, s.bc_mu, s.b_theta, s.bc_theta})
    if (!(v > 0.0) || !std::isfinite(v)) fail("variance parameters must be positive and finite");
  for (std::size_t j = 0; j < p; ++j) {
    if (s.K_mu[j] && !s.J_mu[j]) fail("K_mu[" + std::to_string(j) + "] = 1 requires J_mu = 1");
    if (!s.J_mu[j] && s.beta_mu(j) != 0.0) fail("inactive beta_mu must be stored as zero");
    if (!s.K_mu[j] && (s.c_mu(j) != 0.0 || !s.alpha_mu[j].isZero(0.0)))
      fail("inactive flexible mean block must be stored as zero");
    if (s.K_theta[j] && !s.J_theta) fail("K_theta = 1 requires J_theta = 1");
    if (!s.K_theta[j] && (s.c_theta(j) != 0.0 || !s.alpha_theta[j].isZero(0.0)))
      fail("inactive flexible dispersion block must be stored as zero");
  }
  if (!s.J_theta && !s.beta_theta.isZero(0.0)) fail("J_theta = 0 requires beta_theta = 0");
  for (std::size_t k = 0; k < s.K_int.size(); ++k)
    if (!s.K_int[k] && (s.c_int(k) != 0.0 || !s.alpha_int[k].isZero(0.0)))
      fail("inactive interaction block must be stored as zero");
}

}  // namespace

void Hyperparameters::validate() const {
  if (!(s > 2.0)) throw ConfigError("IG shape s must exceed 2");
  if (!(t > 0.0)) throw ConfigError("IG scale t must be positive");
  if (!(beta0_var > 0.0) || !(ac_prior_var > 0.0)) throw ConfigError("prior variances must be positive");
  if (!(p_Jtheta > 0.0 && p_Jtheta < 1.0)) throw ConfigError("p_Jtheta must lie in (0, 1)");
  if (!(energy_threshold > 0.0 && energy_threshold <= 1.0))
    throw ConfigError("energy threshold must lie in (0, 1]");
}

ModelStructure ModelStructure::gam() {
  ModelStructure s;
  s.dispersion = IndicatorMode::FixedOff;
  s.flexible_dispersion = IndicatorMode::FixedOff;
  return s;
}

ModelStructure ModelStructure::no_selection(bool dispersion, bool interactions) {
  ModelStructure s;
  s.linear_mean = s.flexible_mean = IndicatorMode::FixedOn;
  s.dispersion = s.flexible_dispersion = dispersion ? IndicatorMode::FixedOn : IndicatorMode::FixedOff;
  s.interactions = interactions ? IndicatorMode::FixedOn : IndicatorMode::FixedOff;
  return s;
}

void ModelStructure::validate() const {
  if (flexible_mean == IndicatorMode::FixedOn && linear_mean != IndicatorMode::FixedOn)
    throw ConfigError("flexible mean terms fixed on require linear terms fixed on");
  if (flexible_dispersion == IndicatorMode::FixedOn && dispersion != IndicatorMode::FixedOn)
    throw ConfigError("flexible dispersion terms fixed on require the dispersion model fixed on");
  if (interactions == IndicatorMode::FixedOn && flexible_mean != IndicatorMode::FixedOn)
    throw ConfigError("interactions fixed on require flexible mean terms fixed on");
  if (interactions != IndicatorMode::FixedOff && flexible_mean == IndicatorMode::FixedOff)
    throw ConfigError("interactions need flexible mean terms");
}

Dataset Dataset::build(ExponentialFamily family, std::vector<double> y, std::vector<Weight> weights,
                       const std::vector<std::vector<double>>& raw_covariates,
                       double energy_threshold, bool with_interactions) {
  Dataset d;
  d.family = family;
  const std::size_t n = y.size();
  if (weights.empty()) weights.assign(n, Weight{});
  if (weights.size() != n) throw DataError("weights and responses differ in length");
  const std::size_t p = raw_covariates.size();
  if (n == 0 && p > 0) throw DataError("covariates given without observations");
  d.weights = std::move(weights);
  d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < p; ++j) {
    if (raw_covariates[j].size() != n) {
      std::ostringstream os;
      os << "covariate " << j << " has " << raw_covariates[j].size() << " values, expected " << n;
      throw DataError(os.str());
    }
    d.covariates.push_back(RescaledCovariate::from_raw(raw_covariates[j]));
    for (std::size_t i = 0; i < n; ++i) d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d.covariates[j].standardized[i];
    d.bases.push_back(build_basis(d.covariates[j], energy_threshold));
  }
  if (with_interactions)
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t k = j + 1; k < p; ++k)
        d.interactions.push_back(
            build_interaction_basis(d.covariates[j], d.covariates[k], energy_threshold, j, k));
  return d.with_responses(std::move(y));
}

Dataset Dataset::assemble(ExponentialFamily family, std::vector<double> y, std::vector<Weight> weights,
                          std::vector<RescaledCovariate> covariates, std::vector<SmoothBasis> bases,
                          std::vector<InteractionBasis> interactions) {
  const std::size_t n = y.size(), p = covariates.size();
  if (weights.size() != n) throw DataError("weights and responses differ in length");
  if (bases.size() != p) throw DataError("one basis per covariate required");
  Dataset d;
  d.family = family;
  d.weights = std::move(weights);
  d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < p; ++j) {
    if (covariates[j].size() != n || bases[j].rows() != n)
      throw DataError("covariate " + std::to_string(j) + " does not match the response length");
    for (std::size_t i = 0; i < n; ++i)
      d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = covariates[j].standardized[i];
  }
  for (const auto& ib : interactions)
    if (ib.j >= ib.k || ib.k >= p || ib.basis.rows() != n) throw DataError("malformed interaction basis");
  d.covariates = std::move(covariates);
  d.bases = std::move(bases);
  d.interactions = std::move(interactions);
  return d.with_responses(std::move(y));
}

Dataset Dataset::with_responses(std::vector<double> new_y) const {
  Dataset d = *this;
  if (new_y.size() != weights.size()) throw DataError("response vector has the wrong length");
  d.y = std::move(new_y);
  d.log_saturated.resize(d.y.size());
  d.saturated_kernel.resize(d.y.size());
  for (std::size_t i = 0; i < d.y.size(); ++i) {
    try {
      family.check_weight(d.weights[i]);
      family.check_support(d.y[i], d.weights[i]);
    } catch (const DomainError& e) {
      std::ostringstream os;
      os << "observation " << i << ": " << e.what();
      throw DataError(os.str());
    }
    d.log_saturated[i] = log_saturated_density(family, d.y[i], d.weights[i]);
    d.saturated_kernel[i] = d.weights[i].a * family.saturated_kernel(d.y[i]) / family.phi;
  }
  return d;
}

bool ModelState::operator==(const ModelState& o) const {
  return beta0_mu == o.beta0_mu && vec_equal(beta_mu, o.beta_mu) && J_mu == o.J_mu &&
         b_mu == o.b_mu && vecs_equal(alpha_mu, o.alpha_mu) && vec_equal(c_mu, o.c_mu) &&
         K_mu == o.K_mu && ac_mu == o.ac_mu && bc_mu == o.bc_mu &&
         vec_equal(beta_theta, o.beta_theta) && J_theta == o.J_theta && b_theta == o.b_theta &&
         vecs_equal(alpha_theta, o.alpha_theta) && vec_equal(c_theta, o.c_theta) &&
         K_theta == o.K_theta && ac_theta == o.ac_theta && bc_theta == o.bc_theta &&
         vecs_equal(alpha_int, o.alpha_int) && vec_equal(c_int, o.c_int) && K_int == o.K_int;
}

ModelState initial_state(const Dataset& data, const Hyperparameters& hyp,
                         const ModelStructure& structure) {
  structure.validate();
  const std::size_t p = data.p();
  const auto pi = static_cast<Eigen::Index>(p);
  ModelState s;
  double ybar = 0.0;
  for (double v : data.y) ybar += v;
  if (!data.y.empty()) ybar /= static_cast<double>(data.y.size());
  switch (data.family.id) {
    case Family::Poisson: s.beta0_mu = data.y.empty() ? 0.0 : std::log(std::max(ybar, 0.1)); break;
    case Family::Binomial: {
      const double m = data.y.empty() ? 0.5 : std::clamp(ybar, 0.01, 0.99);
      s.beta0_mu = std::log(m / (1.0 - m));
      break;
    }
    case Family::Gaussian: s.beta0_mu = ybar; break;
  }
  const double ig_mean = hyp.t / (hyp.s - 1.0);
  s.beta_mu = Eigen::VectorXd::Zero(pi);
  s.J_mu.assign(p, fixed_value(structure.linear_mean));
  s.b_mu = s.bc_mu = s.b_theta = s.bc_theta = ig_mean;
  s.K_mu.assign(p, fixed_value(structure.flexible_mean));
  s.c_mu = Eigen::VectorXd::Zero(pi);
  s.beta_theta = Eigen::VectorXd::Zero(pi + 1);
  s.J_theta = fixed_value(structure.dispersion);
  s.K_theta.assign(p, fixed_value(structure.flexible_dispersion));
  s.c_theta = Eigen::VectorXd::Zero(pi);
  for (std::size_t j = 0; j < p; ++j) {
    const auto m = static_cast<Eigen::Index>(data.bases[j].rank());
    s.alpha_mu.push_back(Eigen::VectorXd::Zero(m));
    s.alpha_theta.push_back(Eigen::VectorXd::Zero(m));
  }
  s.K_int.assign(data.pairs(), fixed_value(structure.interactions));
  s.c_int = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(data.pairs()));
  for (const auto& ib : data.interactions)
    s.alpha_int.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ib.basis.rank())));
  return s;
}

void check_invariants(const ModelState& state, const Dataset& data, const ModelStructure& structure) {
  if (state.p() != data.p()) fail("state and data disagree on the number of covariates");
  check_state_shape(state);
  for (std::size_t j = 0; j < data.p(); ++j) {
    const auto m = static_cast<Eigen::Index>(data.bases[j].rank());
    if (state.alpha_mu[j].size() != m || state.alpha_theta[j].size() != m)
      fail("flexible coefficient length differs from the basis rank");
  }
  if (state.K_int.size() != data.pairs()) fail("interaction block count differs from the data");
  for (std::size_t k = 0; k < data.pairs(); ++k) {
    const auto& ib = data.interactions[k];
    if (state.alpha_int[k].size() != static_cast<Eigen::Index>(ib.basis.rank()))
      fail("interaction coefficient length differs from the basis rank");
    if (state.K_int[k] && !(state.K_mu[ib.j] && state.K_mu[ib.k]))
      fail("an active interaction requires both flexible main effects");
  }
  auto fixed = [&](IndicatorMode mode, std::span<const std::uint8_t> z, const char* name) {
    if (mode == IndicatorMode::Free) return;
    for (auto v : z)
      if (v != fixed_value(mode)) fail(std::string(name) + " differs from its fixed value");
  };
  fixed(structure.linear_mean, state.J_mu, "J_mu");
  fixed(structure.flexible_mean, state.K_mu, "K_mu");
  const std::uint8_t jt = state.J_theta;
  fixed(structure.dispersion, std::span<const std::uint8_t>(&jt, 1), "J_theta");
  fixed(structure.flexible_dispersion, state.K_theta, "K_theta");
  fixed(structure.interactions, state.K_int, "K_int");
}

Eigen::VectorXd linear_predictor_mean(const ModelState& state, const Dataset& data) {
  if (state.p() != data.p()) throw DomainError("state and data disagree on the number of covariates");
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(data.n()), state.beta0_mu);
  for (std::size_t j = 0; j < data.p(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    if (state.J_mu[j]) eta += state.beta_mu(jj) * data.x.col(jj);
    if (state.K_mu[j]) eta += data.bases[j].w_matrix * state.alpha_mu[j];
  }
  for (std::size_t k = 0; k < state.K_int.size(); ++k)
    if (state.K_int[k]) eta += data.interactions[k].basis.w_matrix * state.alpha_int[k];
  return eta;
}

Eigen::VectorXd linear_predictor_dispersion(const ModelState& state, const Dataset& data) {
  if (state.p() != data.p()) throw DomainError("state and data disagree on the number of covariates");
  const auto n = static_cast<Eigen::Index>(data.n());
  if (!state.J_theta) return Eigen::VectorXd::Zero(n);
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(n, state.beta_theta(0));
  if (data.p() > 0) eta += data.x * state.beta_theta.tail(static_cast<Eigen::Index>(data.p()));
  for (std::size_t j = 0; j < data.p(); ++j)
    if (state.K_theta[j]) eta += data.bases[j].w_matrix * state.alpha_theta[j];
  return eta;
}

std::pair<double, double> linear_predictors_at(const ModelState& state, const Dataset& data,
                                               std::span<const double> x_raw) {
  if (state.p() != data.p()) throw DomainError("state and data disagree on the number of covariates");
  if (x_raw.size() != data.p()) throw DomainError("covariate vector has the wrong length");
  double em = state.beta0_mu, et = 0.0;
  if (state.J_theta) et = state.beta_theta(0);
  for (std::size_t j = 0; j < data.p(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const auto& cov = data.covariates[j];
    const double xs = cov.to_standardized(x_raw[j]);
    const std::span<const double> pt(&x_raw[j], 1);
    if (state.J_mu[j]) em += state.beta_mu(jj) * xs;
    if (state.K_mu[j]) em += predict_at(data.bases[j], cov, state.alpha_mu[j], pt)[0];
    if (state.J_theta) et += state.beta_theta(jj + 1) * xs;
    if (state.K_theta[j]) et += predict_at(data.bases[j], cov, state.alpha_theta[j], pt)[0];
  }
  for (std::size_t k = 0; k < state.K_int.size(); ++k) {
    if (!state.K_int[k]) continue;
    const auto& ib = data.interactions[k];
    em += predict_interaction_at(ib, data.covariates[ib.j], data.covariates[ib.k], state.alpha_int[k],
                                 std::span<const double>(&x_raw[ib.j], 1),
                                 std::span<const double>(&x_raw[ib.k], 1))[0];
  }
  return {em, et};
}

std::optional<ObservationTerms> observation_terms(const Dataset& data, std::size_t i,
                                                  double eta_mu, double eta_theta,
                                                  const Normalizer& norm) {
  const Weight w = data.weights[i];
  const auto z = norm.terms(eta_mu, eta_theta, w);
  if (!z) return std::nullopt;
  const auto& fam = data.family;
  const double theta = std::exp(eta_theta);
  const double scale = w.a / fam.phi;
  const double y = data.y[i];
  const double dev = scale * (y * eta_mu - fam.cumulant(eta_mu)) - data.saturated_kernel[i];
  ObservationTerms t;
  t.value = z->value + 0.5 * eta_theta + data.log_saturated[i] + theta * dev;
  t.d_mu = theta * scale * (y - fam.cumulant_d1(eta_mu)) + z->d_mu;
  t.d2_mu = -theta * scale * fam.cumulant_d2(eta_mu) + z->d2_mu;
  t.d_theta = 0.5 + theta * dev + z->d_theta;
  t.d2_theta = theta * dev + z->d2_theta;
  return t;
}

std::optional<double> log_likelihood(const Dataset& data, const Eigen::VectorXd& eta_mu,
                                     const Eigen::VectorXd& eta_theta, const Normalizer& norm) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const auto t = observation_terms(data, i, eta_mu(ii), eta_theta(ii), norm);
    if (!t) return std::nullopt;
    total += t->value;
  }
  return total;
}

double log_likelihood(const ModelState& state, const Dataset& data, const Normalizer& norm) {
  const Eigen::VectorXd em = linear_predictor_mean(state, data);
  const Eigen::VectorXd et = linear_predictor_dispersion(state, data);
  double total = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const auto t = observation_terms(data, i, em(ii), et(ii), norm);
    if (!t) {
      std::ostringstream os;
      os << "observation " << i << ": linear predictors (" << em(ii) << ", " << et(ii)
         << ") fall outside the normalizer's range";
      throw GridBoundsError("link_mu", em(ii), os.str());
    }
    total += t->value;
  }
  return total;
}

double log_beta_indicator_prior(std::span<const std::uint8_t> z) {
  double ones = 0.0;
  for (auto v : z) ones += v ? 1.0 : 0.0;
  const double zeros = static_cast<double>(z.size()) - ones;
  return std::lgamma(1.0 + ones) + std::lgamma(1.0 + zeros) - std::lgamma(2.0 + ones + zeros);
}

double log_inverse_gamma(double x, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

double log_prior(const ModelState& state, const Hyperparameters& hyp, const ModelStructure& structure) {
  check_state_shape(state);
  const std::size_t p = state.p();
  double lp = log_normal(state.beta0_mu, 0.0, hyp.beta0_var);
  for (double b : {state.b_mu, state.bc_mu, state.b_theta, state.bc_theta})
    lp += log_inverse_gamma(b, hyp.s, hyp.t);
  lp += log_normal(state.ac_mu, 0.0, hyp.ac_prior_var) + log_normal(state.ac_theta, 0.0, hyp.ac_prior_var);

  std::vector<std::uint8_t> eligible_k;
  for (std::size_t j = 0; j < p; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    if (state.J_mu[j]) {
      lp += log_normal(state.beta_mu(jj), 0.0, state.b_mu);
      eligible_k.push_back(state.K_mu[j]);
    }
    if (state.K_mu[j])
      lp += log_normal(state.c_mu(jj), state.ac_mu, state.bc_mu) +
            log_normal_iso(state.alpha_mu[j], std::exp(state.c_mu(jj)));
  }
  if (structure.linear_mean == IndicatorMode::Free) lp += log_beta_indicator_prior(state.J_mu);
  if (structure.flexible_mean == IndicatorMode::Free) lp += log_beta_indicator_prior(eligible_k);

  if (structure.dispersion == IndicatorMode::Free)
    lp += std::log(state.J_theta ? hyp.p_Jtheta : 1.0 - hyp.p_Jtheta);
  if (state.J_theta) {
    lp += log_normal_iso(state.beta_theta, state.b_theta);
    for (std::size_t j = 0; j < p; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      if (state.K_theta[j])
        lp += log_normal(state.c_theta(jj), state.ac_theta, state.bc_theta) +
              log_normal_iso(state.alpha_theta[j], std::exp(state.c_theta(jj)));
    }
    if (structure.flexible_dispersion == IndicatorMode::Free)
      lp += log_beta_indicator_prior(state.K_theta);
  }

  if (!state.K_int.empty()) {
    std::vector<std::uint8_t> eligible_pairs;
    std::size_t k = 0;
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = a + 1; b < p; ++b, ++k) {
        if (k >= state.K_int.size()) fail("more interaction blocks than covariate pairs");
        if (state.K_int[k] && !(state.K_mu[a] && state.K_mu[b]))
          fail("an active interaction requires both flexible main effects");
        if (state.K_mu[a] && state.K_mu[b]) eligible_pairs.push_back(state.K_int[k]);
        if (state.K_int[k])
          lp += log_normal(state.c_int(static_cast<Eigen::Index>(k)), state.ac_mu, state.bc_mu) +
                log_normal_iso(state.alpha_int[k], std::exp(state.c_int(static_cast<Eigen::Index>(k))));
      }
    if (structure.interactions == IndicatorMode::Free) lp += log_beta_indicator_prior(eligible_pairs);
  }
  return lp;
}

std::string_view effect_kind_name(EffectKind k) noexcept {
  switch (k) {
    case EffectKind::Null: return "null";
    case EffectKind::Linear: return "linear";
    case EffectKind::Flexible: return "flexible";
  }
  return "unknown";
}

EffectKind effect_kind_mean(const ModelState& state, std::size_t j) {
  if (j >= state.p()) throw DomainError("covariate index out of range");
  if (state.K_mu[j]) return EffectKind::Flexible;
  return state.J_mu[j] ? EffectKind::Linear : EffectKind::Null;
}

EffectKind effect_kind_dispersion(const ModelState& state, std::size_t j) {
  if (j >= state.p()) throw DomainError("covariate index out of range");
  if (!state.J_theta) return EffectKind::Null;
  return state.K_theta[j] ? EffectKind::Flexible : EffectKind::Linear;
}

ModelState draw_prior(const Dataset& data, const Hyperparameters& hyp,
                      const ModelStructure& structure, Rng& rng) {
  ModelState s = initial_state(data, hyp, structure);
  const std::size_t p = data.p();
  s.beta0_mu = draw_normal(rng, 0.0, std::sqrt(hyp.beta0_var));
  s.b_mu = draw_inverse_gamma(rng, hyp.s, hyp.t);
  s.bc_mu = draw_inverse_gamma(rng, hyp.s, hyp.t);
  s.ac_mu = draw_normal(rng, 0.0, std::sqrt(hyp.ac_prior_var));
  s.b_theta = draw_inverse_gamma(rng, hyp.s, hyp.t);
  s.bc_theta = draw_inverse_gamma(rng, hyp.s, hyp.t);
  s.ac_theta = draw_normal(rng, 0.0, std::sqrt(hyp.ac_prior_var));

  auto draw_flex = [&](Eigen::VectorXd& alpha, double& c, double a, double b) {
    c = draw_normal(rng, a, std::sqrt(b));
    const double sd = std::exp(0.5 * c);
    for (auto& e : alpha) e = draw_normal(rng, 0.0, sd);
  };

  s.J_mu = bernoulli_block(p, structure.linear_mean, rng);
  for (std::size_t j = 0; j < p; ++j)
    if (s.J_mu[j]) s.beta_mu(static_cast<Eigen::Index>(j)) = draw_normal(rng, 0.0, std::sqrt(s.b_mu));
  std::vector<std::size_t> eligible;
  for (std::size_t j = 0; j < p; ++j)
    if (s.J_mu[j]) eligible.push_back(j);
  const auto k_draw = bernoulli_block(eligible.size(), structure.flexible_mean, rng);
  std::fill(s.K_mu.begin(), s.K_mu.end(), 0);
  for (std::size_t e = 0; e < eligible.size(); ++e) s.K_mu[eligible[e]] = k_draw[e];
  for (std::size_t j = 0; j < p; ++j)
    if (s.K_mu[j]) draw_flex(s.alpha_mu[j], s.c_mu(static_cast<Eigen::Index>(j)), s.ac_mu, s.bc_mu);

  if (!data.interactions.empty()) {
    std::vector<std::size_t> pairs;
    for (std::size_t k = 0; k < data.pairs(); ++k)
      if (s.K_mu[data.interactions[k].j] && s.K_mu[data.interactions[k].k]) pairs.push_back(k);
    const auto ki = bernoulli_block(pairs.size(), structure.interactions, rng);
    std::fill(s.K_int.begin(), s.K_int.end(), 0);
    for (std::size_t e = 0; e < pairs.size(); ++e) s.K_int[pairs[e]] = ki[e];
    for (std::size_t k = 0; k < data.pairs(); ++k)
      if (s.K_int[k]) draw_flex(s.alpha_int[k], s.c_int(static_cast<Eigen::Index>(k)), s.ac_mu, s.bc_mu);
  }

  if (structure.dispersion == IndicatorMode::Free)
    s.J_theta = draw_bernoulli(rng, hyp.p_Jtheta) ? 1 : 0;
  if (s.J_theta) {
    for (auto& e : s.beta_theta) e = draw_normal(rng, 0.0, std::sqrt(s.b_theta));
    s.K_theta = bernoulli_block(p, structure.flexible_dispersion, rng);
    for (std::size_t j = 0; j < p; ++j)
      if (s.K_theta[j])
        draw_flex(s.alpha_theta[j], s.c_theta(static_cast<Eigen::Index>(j)), s.ac_theta, s.bc_theta);
  } else {
    std::fill(s.K_theta.begin(), s.K_theta.end(), 0);
  }
  return s;
}

std::vector<double> simulate_responses(const ModelState& state, const Dataset& data, Rng& rng,
                                       std::uint32_t truncation) {
  const Eigen::VectorXd em = linear_predictor_mean(state, data);
  const Eigen::VectorXd et = linear_predictor_dispersion(state, data);
  std::vector<double> y(data.n());
  for (std::size_t i = 0; i < data.n(); ++i)
    y[i] = draw_double(data.family, em(static_cast<Eigen::Index>(i)),
                       et(static_cast<Eigen::Index>(i)), data.weights[i], rng, truncation);
  return y;
}

}  // namespace dexreg
