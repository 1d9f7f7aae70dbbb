#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dexreg/dexp.hpp"
#include "dexreg/model.hpp"
#include "dexreg/random.hpp"

namespace dexreg {

struct McmcConfig {
  std::size_t iterations = 1000;  // retained sweeps after burn-in, before thinning
  std::size_t burn_in = 0;
  std::uint64_t seed = 1;
  // One Newton step keeps proposals near the current state; fully converged
  // fits act like independence proposals and can lock a chain in a tail.
  int laplace_max_steps = 1;
  double laplace_grad_tol = 1e-6;
  std::size_t thin = 1;

  void validate() const;  // throws ConfigError
};

// N(mean, precision⁻¹) with a cached Cholesky factor.
class GaussianProposal {
 public:
  // Throws NumericalError unless precision is symmetric positive definite.
  GaussianProposal(Eigen::VectorXd mean, Eigen::MatrixXd precision);

  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  const Eigen::MatrixXd& precision() const noexcept { return precision_; }
  Eigen::Index dim() const noexcept { return mean_.size(); }

  double log_density(const Eigen::VectorXd& x) const;
  Eigen::VectorXd draw(Rng& rng) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd precision_;
  Eigen::MatrixXd lower_;  // precision = L Lᵀ
  double log_det_ = 0.0;
};

// Negative log target with analytic gradient and Hessian; nullopt when the
// point is outside the normalizer's range or the value is not finite.
struct ObjectiveValue {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};
using Objective = std::function<std::optional<ObjectiveValue>(const Eigen::VectorXd&)>;

// Symmetrizes h and adds a growing diagonal ridge until Cholesky succeeds.
Eigen::MatrixXd regularize_spd(Eigen::MatrixXd h);

// Damped Newton minimization stopped after cfg.laplace_max_steps steps or once
// the gradient's max-norm drops below cfg.laplace_grad_tol. Throws
// NumericalError if the objective is not finite at psi_init.
GaussianProposal laplace_approx(const Objective& objective, const Eigen::VectorXd& psi_init,
                                const McmcConfig& cfg);

// Proposal for a flexible block (c, α) given a Gaussian approximation q1 to
// the likelihood in α and the prior α | c ~ N(0, e^c I), c ~ N(a, b).
class MarginalSmoothing {
 public:
  MarginalSmoothing(const GaussianProposal& q1, double c_prior_mean, double c_prior_var,
                    const McmcConfig& cfg);

  // log ∫ q1(α) N(α; 0, e^c I) dα, i.e. log N(μ₁; 0, Σ₁ + e^c I).
  double log_q2(double c) const;
  const GaussianProposal& c_proposal() const noexcept { return c_proposal_; }

  // Exact conditional α | c ∝ q1(α) N(α; 0, e^c I).
  double alpha_log_density(double c, const Eigen::VectorXd& alpha) const;
  Eigen::VectorXd draw_alpha(double c, Rng& rng) const;

  double log_density(double c, const Eigen::VectorXd& alpha) const {
    return c_proposal_.log_density(Eigen::VectorXd::Constant(1, c)) + alpha_log_density(c, alpha);
  }
  std::pair<double, Eigen::VectorXd> draw(Rng& rng) const;

 private:
  Eigen::MatrixXd u_;
  Eigen::VectorXd lambda_;
  Eigen::VectorXd nu_;  // Uᵀ μ₁
  GaussianProposal c_proposal_;
};

// Closed-form full conditionals.
struct InverseGammaParams {
  double shape;
  double scale;
};
struct NormalParams {
  double mean;
  double var;
};
enum class Side : std::uint8_t { Mean, Dispersion };

InverseGammaParams b_mu_conditional(const ModelState& state, const Hyperparameters& hyp);
InverseGammaParams b_theta_conditional(const ModelState& state, const Hyperparameters& hyp);
// Mean side includes the active interaction blocks, which share a^{cμ}, b^{cμ}.
NormalParams ac_conditional(const ModelState& state, const Hyperparameters& hyp, Side side);
InverseGammaParams bc_conditional(const ModelState& state, const Hyperparameters& hyp, Side side);

double gibbs_b_mu(const ModelState& state, const Hyperparameters& hyp, Rng& rng);
double gibbs_b_theta(const ModelState& state, const Hyperparameters& hyp, Rng& rng);
double gibbs_ac(const ModelState& state, const Hyperparameters& hyp, Side side, Rng& rng);
double gibbs_bc(const ModelState& state, const Hyperparameters& hyp, Side side, Rng& rng);

struct SamplerOptions {
  bool update_b_mu = true;
  bool update_b_theta = true;
  // Holds every c at its current value and skips the a^c, b^c updates.
  // Requires the flexible indicators to be fixed.
  bool fix_smoothing = false;
  bool check_invariants = false;  // verify the state after every sweep
};

enum class Step : std::uint8_t {
  Intercept,
  LinearMean,
  VarianceMean,
  FlexibleMean,
  SmoothingMean,
  Interaction,
  Dispersion,
  VarianceDispersion,
  FlexibleDispersion,
  SmoothingDispersion,
};
inline constexpr std::size_t kStepCount = 10;
std::string_view step_name(Step s) noexcept;

struct StepStats {
  std::size_t proposed = 0;
  std::size_t accepted = 0;
  std::size_t skipped = 0;  // numerical failure while building a proposal
  double rate() const noexcept { return proposed ? double(accepted) / double(proposed) : 0.0; }
};

// One chain's transition kernel. Holds the current state with its cached
// linear predictors, log-likelihood and log prior.
class Sampler {
 public:
  Sampler(const Dataset& data, const Normalizer& norm, Hyperparameters hyp, ModelStructure structure,
          McmcConfig cfg, SamplerOptions options, ModelState init, std::uint64_t seed);

  const ModelState& state() const noexcept { return state_; }
  double log_likelihood() const noexcept { return loglik_; }
  double log_prior() const noexcept { return logprior_; }
  const std::array<StepStats, kStepCount>& stats() const noexcept { return stats_; }
  Rng& rng() noexcept { return rng_; }

  // Replaces the current state (e.g. after new responses).
  void reset(ModelState state);
  void set_data(const Dataset& data);

  void sweep();

  void step_intercept();
  void step_linear_mean(std::size_t j);
  void step_variance_mean();
  void step_flexible_mean(std::size_t j);
  void step_smoothing_mean();
  void step_interaction(std::size_t k);
  void step_dispersion();
  void step_variance_dispersion();
  void step_flexible_dispersion(std::size_t j);
  void step_smoothing_dispersion();

 private:
  struct Block;
  bool metropolis(Step step, ModelState proposal, double log_q_forward, double log_q_reverse);
  std::optional<GaussianProposal> laplace_block(Step step, const Block& block, const Eigen::VectorXd& start);
  void flexible_step(Step step, Side side, std::size_t j, bool is_interaction);
  double indicator_probability(std::span<const std::uint8_t> eligible_others) const;
  void refresh();

  const Dataset* data_;
  const Normalizer* norm_;
  Hyperparameters hyp_;
  ModelStructure structure_;
  McmcConfig cfg_;
  SamplerOptions options_;
  ModelState state_;
  Eigen::VectorXd eta_mu_;
  Eigen::VectorXd eta_theta_;
  double loglik_ = 0.0;
  double logprior_ = 0.0;
  Rng rng_;
  std::array<StepStats, kStepCount> stats_{};
};

struct ChainResult {
  std::vector<ModelState> states;
  std::vector<std::size_t> iterations;  // sweep index of each retained state, from 1
  std::vector<double> log_likelihood;
  std::array<StepStats, kStepCount> stats{};
};

// Runs burn_in + iterations sweeps and keeps every thin-th post-burn-in
// state. Throws NumericalError naming the sweep and step on an abort.
ChainResult run_chain(const Dataset& data, const Normalizer& norm, const Hyperparameters& hyp,
                      const ModelStructure& structure, const McmcConfig& cfg,
                      const SamplerOptions& options = {},
                      std::optional<ModelState> init = std::nullopt);

}  // namespace dexreg
