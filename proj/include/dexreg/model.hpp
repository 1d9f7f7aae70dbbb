#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dexreg/dexp.hpp"
#include "dexreg/expfam.hpp"
#include "dexreg/random.hpp"
#include "dexreg/smooth.hpp"

namespace dexreg {

struct Hyperparameters {
  double s = 101.0;
  double t = 10100.0;
  double beta0_var = 1e10;
  double ac_prior_var = 100.0;
  double p_Jtheta = 0.5;
  double energy_threshold = 0.98;

  void validate() const;  // throws ConfigError
};

// Whether an indicator group is sampled or held at 0 / 1.
enum class IndicatorMode : std::uint8_t { Free, FixedOn, FixedOff };

struct ModelStructure {
  IndicatorMode linear_mean = IndicatorMode::Free;          // J^μ
  IndicatorMode flexible_mean = IndicatorMode::Free;        // K^μ
  IndicatorMode dispersion = IndicatorMode::Free;           // J^θ
  IndicatorMode flexible_dispersion = IndicatorMode::Free;  // K^θ
  IndicatorMode interactions = IndicatorMode::FixedOff;     // K^I

  // J^θ fixed at 0: a generalized additive model with selection.
  static ModelStructure gam();
  // Every indicator fixed at 1 (dispersion and interactions as requested).
  static ModelStructure no_selection(bool dispersion, bool interactions);

  void validate() const;  // throws ConfigError
  friend bool operator==(const ModelStructure&, const ModelStructure&) = default;
};

struct Dataset {
  ExponentialFamily family;
  std::vector<double> y;        // proportions for the binomial
  std::vector<Weight> weights;
  Eigen::MatrixXd x;            // n × p, standardized columns
  std::vector<RescaledCovariate> covariates;
  std::vector<SmoothBasis> bases;
  std::vector<InteractionBasis> interactions;  // pairs (j, k), j < k, lexicographic

  // log p(y_i; y_i) and A_i [y ψ(y) − b(ψ(y))] / φ
  std::vector<double> log_saturated;
  std::vector<double> saturated_kernel;

  std::size_t n() const noexcept { return y.size(); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(x.cols()); }
  std::size_t pairs() const noexcept { return interactions.size(); }

  // Standardizes the covariates, builds the bases and caches the saturated
  // terms. Throws DataError on invalid responses or degenerate covariates.
  static Dataset build(ExponentialFamily family, std::vector<double> y, std::vector<Weight> weights,
                       const std::vector<std::vector<double>>& raw_covariates,
                       double energy_threshold = 0.98, bool with_interactions = false);
  // From stored affine maps and bases, e.g. when loading a saved fit.
  static Dataset assemble(ExponentialFamily family, std::vector<double> y, std::vector<Weight> weights,
                          std::vector<RescaledCovariate> covariates, std::vector<SmoothBasis> bases,
                          std::vector<InteractionBasis> interactions);
  // Same covariates and bases with a new response vector.
  Dataset with_responses(std::vector<double> new_y) const;
};

// All parameters and latent indicators of one MCMC state. Inactive blocks
// are stored as exact zeros.
struct ModelState {
  double beta0_mu = 0.0;
  Eigen::VectorXd beta_mu;
  std::vector<std::uint8_t> J_mu;
  double b_mu = 1.0;
  std::vector<Eigen::VectorXd> alpha_mu;
  Eigen::VectorXd c_mu;
  std::vector<std::uint8_t> K_mu;
  double ac_mu = 0.0;
  double bc_mu = 1.0;

  Eigen::VectorXd beta_theta;  // intercept first, length p + 1
  std::uint8_t J_theta = 0;
  double b_theta = 1.0;
  std::vector<Eigen::VectorXd> alpha_theta;
  Eigen::VectorXd c_theta;
  std::vector<std::uint8_t> K_theta;
  double ac_theta = 0.0;
  double bc_theta = 1.0;

  std::vector<Eigen::VectorXd> alpha_int;
  Eigen::VectorXd c_int;
  std::vector<std::uint8_t> K_int;

  std::size_t p() const noexcept { return J_mu.size(); }
  bool operator==(const ModelState&) const;
};

// Starting state: indicators at their fixed values or 0, coefficients 0,
// β₀ at the link of the mean response, variances at their prior means.
ModelState initial_state(const Dataset& data, const Hyperparameters& hyp,
                         const ModelStructure& structure = {});

// Throws InvariantError naming the first violated constraint.
void check_invariants(const ModelState& state, const Dataset& data,
                      const ModelStructure& structure = {});

Eigen::VectorXd linear_predictor_mean(const ModelState& state, const Dataset& data);
Eigen::VectorXd linear_predictor_dispersion(const ModelState& state, const Dataset& data);

// Log-likelihood contribution of one observation and its derivatives in
// the two linear predictors; nullopt outside the normalizer's range.
struct ObservationTerms {
  double value = 0.0;
  double d_mu = 0.0;
  double d2_mu = 0.0;
  double d_theta = 0.0;
  double d2_theta = 0.0;
};
std::optional<ObservationTerms> observation_terms(const Dataset& data, std::size_t i,
                                                  double eta_mu, double eta_theta,
                                                  const Normalizer& norm);

// (η^μ, η^θ) at a raw-scale covariate vector, using the training maps and
// bases for out-of-sample smooth terms.
std::pair<double, double> linear_predictors_at(const ModelState& state, const Dataset& data,
                                               std::span<const double> x_raw);

// Σ_i log double density; throws GridBoundsError naming the observation.
double log_likelihood(const ModelState& state, const Dataset& data, const Normalizer& norm);
// Same from precomputed predictors; nullopt if any observation is out of range.
std::optional<double> log_likelihood(const Dataset& data, const Eigen::VectorXd& eta_mu,
                                     const Eigen::VectorXd& eta_theta, const Normalizer& norm);

// log B(1 + Σ z, 1 + Σ (1 − z)) over the entries of z.
double log_beta_indicator_prior(std::span<const std::uint8_t> z);

double log_prior(const ModelState& state, const Hyperparameters& hyp,
                 const ModelStructure& structure = {});

// log density of IG(shape, scale) at x.
double log_inverse_gamma(double x, double shape, double scale);

enum class EffectKind : std::uint8_t { Null, Linear, Flexible };
std::string_view effect_kind_name(EffectKind k) noexcept;
EffectKind effect_kind_mean(const ModelState& state, std::size_t j);
EffectKind effect_kind_dispersion(const ModelState& state, std::size_t j);

// A draw from the joint prior, the π parameters drawn and discarded.
ModelState draw_prior(const Dataset& data, const Hyperparameters& hyp,
                      const ModelStructure& structure, Rng& rng);

// Responses drawn from the exact double family at the state's predictors.
std::vector<double> simulate_responses(const ModelState& state, const Dataset& data, Rng& rng,
                                       std::uint32_t truncation = 1000);

}  // namespace dexreg
