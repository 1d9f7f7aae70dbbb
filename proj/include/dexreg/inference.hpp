#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dexreg/dexp.hpp"
#include "dexreg/model.hpp"
#include "dexreg/sampler.hpp"

namespace dexreg {

struct EffectProbabilities {
  double null = 0.0;
  double linear = 0.0;
  double flexible = 0.0;
};

struct EffectTable {
  std::vector<EffectProbabilities> mean;
  std::vector<EffectProbabilities> dispersion;
  std::vector<double> interaction;  // per pair, in Dataset order
  double dispersion_model = 0.0;    // P(J^θ = 1)
};

// Relative frequencies over the chain; throws DomainError if it is empty.
EffectTable effect_probabilities(std::span<const ModelState> chain);

// Sample quantile with linear interpolation between order statistics
// (Hyndman–Fan type 7).
double quantile(std::vector<double> values, double q);

struct CurveSummary {
  std::vector<double> x;  // raw covariate scale
  std::vector<double> mean;
  std::vector<double> lower;  // pointwise 2.5%
  std::vector<double> upper;  // pointwise 97.5%
};

// Evenly spaced points over the observed range of a covariate.
std::vector<double> curve_abscissae(const RescaledCovariate& cov, std::size_t points = 50);

// Posterior summary of the effect of covariate j on one side:
// β_j·standardize(x) + smooth_j(x) per retained state.
CurveSummary fitted_curve(std::span<const ModelState> chain, const Dataset& data, Side side, std::size_t j,
                          std::span<const double> abscissae);

// log Z at a link-scale point, from the normalizer where it is available and
// by brute-force summation elsewhere.
double log_z_with_fallback(const ExponentialFamily& fam, const Normalizer& norm, double link_mu,
                           double link_theta, Weight w, std::uint32_t truncation = 1000);

// Chain average of the double density at raw covariates x_raw and response y.
double predictive_density(std::span<const ModelState> chain, const Dataset& data, const Normalizer& norm,
                          std::span<const double> x_raw, double y, Weight w = {});

// Σ p log(p / q) over probability masses on a common support; +∞ when q
// vanishes where p does not.
double kl_divergence(std::span<const double> p_true, std::span<const double> p_hat);
// ∫ p log(p / q) over [lo, hi] from log densities.
double kl_divergence(const std::function<double(double)>& log_p_true,
                     const std::function<double(double)>& log_p_hat, double lo, double hi);

// Link-scale parameters of one double-family distribution.
struct LinkParams {
  double mu;
  double theta;
};

// KL from the double density at `truth` to the chain-averaged predictive at
// the fitted parameters. Discrete sums stop once the remaining true mass is
// below 1e-12 (or at the truncation point); throws NumericalError if more
// than 1e-8 of the true mass lies beyond the truncation point.
double kl_to_predictive(const ExponentialFamily& fam, Weight w, LinkParams truth,
                        std::span<const LinkParams> fitted, const Normalizer& norm,
                        std::uint32_t truncation = 1000);

// (1/n) Σ_i KL(p_true(·|x_i) ‖ p̂(·|x_i)) over the observed predictors.
double akld(std::span<const ModelState> chain, const Dataset& data, const Normalizer& norm,
            std::span<const LinkParams> truth, std::uint32_t truncation = 1000);

// (AKLD without selection − AKLD with selection) / AKLD with selection.
// +∞ (with a warning naming both operands) when the denominator is zero.
double apkl(double akld_no_selection, double akld_selection);

}  // namespace dexreg
