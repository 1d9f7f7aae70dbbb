#include "dexreg/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <tuple>

#include <spdlog/spdlog.h>

#include "dexreg/error.hpp"

namespace dexreg {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double draw_ig(Rng& rng, InverseGammaParams p) { return draw_inverse_gamma(rng, p.shape, p.scale); }

}  // namespace

void McmcConfig::validate() const {
  if (iterations == 0) throw ConfigError("iterations must be positive");
  if (thin == 0) throw ConfigError("thin must be at least 1");
  if (laplace_max_steps < 1) throw ConfigError("laplace_max_steps must be positive");
  if (!(laplace_grad_tol >= 0.0) || !std::isfinite(laplace_grad_tol))
    throw ConfigError("laplace_grad_tol must be a non-negative number");
}

// ---------------------------------------------------------------- proposals

GaussianProposal::GaussianProposal(Eigen::VectorXd mean, Eigen::MatrixXd precision)
    : mean_(std::move(mean)), precision_(std::move(precision)) {
  if (precision_.rows() != mean_.size() || precision_.cols() != mean_.size())
    throw NumericalError("proposal precision has the wrong shape");
  if (!mean_.allFinite() || !precision_.allFinite()) throw NumericalError("proposal is not finite");
  const double scale = 1.0 + precision_.cwiseAbs().maxCoeff();
  if ((precision_ - precision_.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw NumericalError("proposal precision is not symmetric");
  precision_ = 0.5 * (precision_ + precision_.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(precision_);
  if (llt.info() != Eigen::Success) throw NumericalError("proposal precision is not positive definite");
  lower_ = llt.matrixL();
  log_det_ = 2.0 * lower_.diagonal().array().log().sum();
}

double GaussianProposal::log_density(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd z = lower_.transpose() * (x - mean_);
  return -0.5 * (static_cast<double>(dim()) * kLog2Pi - log_det_ + z.squaredNorm());
}

Eigen::VectorXd GaussianProposal::draw(Rng& rng) const {
  Eigen::VectorXd z(dim());
  for (auto& v : z) v = draw_normal(rng);
  return mean_ + lower_.transpose().triangularView<Eigen::Upper>().solve(z);
}

Eigen::MatrixXd regularize_spd(Eigen::MatrixXd h) {
  if (!h.allFinite()) throw NumericalError("Hessian is not finite");
  h = 0.5 * (h + h.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() == Eigen::Success) return h;
  const Eigen::VectorXd base = 1e-8 * (1.0 + h.diagonal().cwiseAbs().array()).matrix();
  double factor = 1.0;
  for (int k = 0; k < 24; ++k, factor *= 10.0) {
    Eigen::MatrixXd r = h;
    r.diagonal() += factor * base;
    llt.compute(r);
    if (llt.info() == Eigen::Success) return r;
  }
  throw NumericalError("Hessian could not be regularized to positive definite");
}

GaussianProposal laplace_approx(const Objective& objective, const Eigen::VectorXd& psi_init,
                                const McmcConfig& cfg) {
  Eigen::VectorXd psi = psi_init;
  auto f = objective(psi);
  if (!f || !std::isfinite(f->value) || !f->gradient.allFinite())
    throw NumericalError("objective is not finite at the starting point");
  for (int step = 0; step < cfg.laplace_max_steps; ++step) {
    if (f->gradient.cwiseAbs().maxCoeff() <= cfg.laplace_grad_tol) break;
    const Eigen::MatrixXd h = regularize_spd(f->hessian);
    const Eigen::VectorXd dir = -h.llt().solve(f->gradient);
    double t = 1.0;
    bool moved = false;
    for (int halving = 0; halving <= 20; ++halving, t *= 0.5) {
      Eigen::VectorXd cand = psi + t * dir;
      auto fc = objective(cand);
      if (fc && std::isfinite(fc->value) && fc->gradient.allFinite() && fc->value <= f->value) {
        psi = std::move(cand);
        f = std::move(fc);
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return GaussianProposal(psi, regularize_spd(f->hessian));
}

MarginalSmoothing::MarginalSmoothing(const GaussianProposal& q1, double c_prior_mean, double c_prior_var,
                                     const McmcConfig& cfg)
    : c_proposal_(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1)) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q1.precision());
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of q1 failed");
  u_ = eig.eigenvectors();
  lambda_ = eig.eigenvalues().cwiseMax(1e-300);
  nu_ = u_.transpose() * q1.mean();

  // Negative log q3(c) = −log q2(c) − log N(c; a, b) in closed form.
  const Eigen::ArrayXd inv_lambda = lambda_.array().inverse();
  const Eigen::ArrayXd nu2 = nu_.array().square();
  Objective obj = [&](const Eigen::VectorXd& cv) -> std::optional<ObjectiveValue> {
    const double c = cv(0);
    const double e = std::exp(c);
    const Eigen::ArrayXd s = inv_lambda + e;
    const double val = 0.5 * (s.log() + nu2 / s).sum() + 0.5 * (c - c_prior_mean) * (c - c_prior_mean) / c_prior_var;
    const double g = 0.5 * (e / s - nu2 * e / s.square()).sum() + (c - c_prior_mean) / c_prior_var;
    const double h = 0.5 * (e / s - e * e / s.square() - nu2 * (e / s.square() - 2.0 * e * e / s.cube())).sum() +
                     1.0 / c_prior_var;
    if (!std::isfinite(val) || !std::isfinite(g) || !std::isfinite(h)) return std::nullopt;
    return ObjectiveValue{val, Eigen::VectorXd::Constant(1, g), Eigen::MatrixXd::Constant(1, 1, h)};
  };
  McmcConfig scalar = cfg;
  scalar.laplace_max_steps = std::max(cfg.laplace_max_steps, 50);
  c_proposal_ = laplace_approx(obj, Eigen::VectorXd::Constant(1, c_prior_mean), scalar);
}

double MarginalSmoothing::log_q2(double c) const {
  const Eigen::ArrayXd s = lambda_.array().inverse() + std::exp(c);
  return -0.5 * (kLog2Pi + s.log() + nu_.array().square() / s).sum();
}

double MarginalSmoothing::alpha_log_density(double c, const Eigen::VectorXd& alpha) const {
  const Eigen::ArrayXd prec = lambda_.array() + std::exp(-c);
  const Eigen::ArrayXd mean = lambda_.array() * nu_.array() / prec;
  const Eigen::ArrayXd z = (u_.transpose() * alpha).array() - mean;
  return -0.5 * (kLog2Pi - prec.log() + prec * z.square()).sum();
}

Eigen::VectorXd MarginalSmoothing::draw_alpha(double c, Rng& rng) const {
  const Eigen::ArrayXd prec = lambda_.array() + std::exp(-c);
  Eigen::ArrayXd z = lambda_.array() * nu_.array() / prec;
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) += draw_normal(rng) / std::sqrt(prec(k));
  return u_ * z.matrix();
}

std::pair<double, Eigen::VectorXd> MarginalSmoothing::draw(Rng& rng) const {
  const double c = c_proposal_.draw(rng)(0);
  return {c, draw_alpha(c, rng)};
}

// ---------------------------------------------------------------- Gibbs

InverseGammaParams b_mu_conditional(const ModelState& state, const Hyperparameters& hyp) {
  double count = 0.0, ss = 0.0;
  for (std::size_t j = 0; j < state.p(); ++j)
    if (state.J_mu[j]) {
      count += 1.0;
      ss += state.beta_mu(static_cast<Eigen::Index>(j)) * state.beta_mu(static_cast<Eigen::Index>(j));
    }
  return {hyp.s + count / 2.0, hyp.t + ss / 2.0};
}

InverseGammaParams b_theta_conditional(const ModelState& state, const Hyperparameters& hyp) {
  if (!state.J_theta) return {hyp.s, hyp.t};
  return {hyp.s + static_cast<double>(state.beta_theta.size()) / 2.0,
          hyp.t + state.beta_theta.squaredNorm() / 2.0};
}

namespace {

std::vector<double> active_log_smoothing(const ModelState& state, Side side) {
  std::vector<double> c;
  if (side == Side::Mean) {
    for (std::size_t j = 0; j < state.p(); ++j)
      if (state.K_mu[j]) c.push_back(state.c_mu(static_cast<Eigen::Index>(j)));
    for (std::size_t k = 0; k < state.K_int.size(); ++k)
      if (state.K_int[k]) c.push_back(state.c_int(static_cast<Eigen::Index>(k)));
  } else {
    for (std::size_t j = 0; j < state.p(); ++j)
      if (state.K_theta[j]) c.push_back(state.c_theta(static_cast<Eigen::Index>(j)));
  }
  return c;
}

}  // namespace

NormalParams ac_conditional(const ModelState& state, const Hyperparameters& hyp, Side side) {
  const auto c = active_log_smoothing(state, side);
  const double bc = side == Side::Mean ? state.bc_mu : state.bc_theta;
  double sum = 0.0;
  for (double v : c) sum += v;
  const double var = 1.0 / (static_cast<double>(c.size()) / bc + 1.0 / hyp.ac_prior_var);
  return {var * sum / bc, var};
}

InverseGammaParams bc_conditional(const ModelState& state, const Hyperparameters& hyp, Side side) {
  const auto c = active_log_smoothing(state, side);
  const double a = side == Side::Mean ? state.ac_mu : state.ac_theta;
  double ss = 0.0;
  for (double v : c) ss += (v - a) * (v - a);
  return {hyp.s + static_cast<double>(c.size()) / 2.0, hyp.t + ss / 2.0};
}

double gibbs_b_mu(const ModelState& state, const Hyperparameters& hyp, Rng& rng) {
  return draw_ig(rng, b_mu_conditional(state, hyp));
}

double gibbs_b_theta(const ModelState& state, const Hyperparameters& hyp, Rng& rng) {
  return draw_ig(rng, b_theta_conditional(state, hyp));
}

double gibbs_ac(const ModelState& state, const Hyperparameters& hyp, Side side, Rng& rng) {
  const auto p = ac_conditional(state, hyp, side);
  return draw_normal(rng, p.mean, std::sqrt(p.var));
}

double gibbs_bc(const ModelState& state, const Hyperparameters& hyp, Side side, Rng& rng) {
  return draw_ig(rng, bc_conditional(state, hyp, side));
}

// ---------------------------------------------------------------- sampler

std::string_view step_name(Step s) noexcept {
  switch (s) {
    case Step::Intercept: return "intercept";
    case Step::LinearMean: return "linear_mean";
    case Step::VarianceMean: return "variance_mean";
    case Step::FlexibleMean: return "flexible_mean";
    case Step::SmoothingMean: return "smoothing_mean";
    case Step::Interaction: return "interaction";
    case Step::Dispersion: return "dispersion";
    case Step::VarianceDispersion: return "variance_dispersion";
    case Step::FlexibleDispersion: return "flexible_dispersion";
    case Step::SmoothingDispersion: return "smoothing_dispersion";
  }
  return "unknown";
}

// A coefficient block entering one linear predictor as offset + design·ψ,
// with independent N(0, 1/prior_precision) priors (zero precision for a
// likelihood-only approximation).
struct Sampler::Block {
  Side side;
  Eigen::MatrixXd design;
  Eigen::VectorXd offset;
  Eigen::VectorXd prior_precision;
};

Sampler::Sampler(const Dataset& data, const Normalizer& norm, Hyperparameters hyp, ModelStructure structure,
                 McmcConfig cfg, SamplerOptions options, ModelState init, std::uint64_t seed)
    : data_(&data),
      norm_(&norm),
      hyp_(hyp),
      structure_(structure),
      cfg_(cfg),
      options_(options),
      rng_(seed) {
  hyp_.validate();
  structure_.validate();
  cfg_.validate();
  if (options_.fix_smoothing &&
      (structure_.flexible_mean == IndicatorMode::Free || structure_.flexible_dispersion == IndicatorMode::Free ||
       structure_.interactions == IndicatorMode::Free))
    throw ConfigError("fixed smoothing parameters require fixed flexible indicators");
  reset(std::move(init));
}

void Sampler::reset(ModelState state) {
  check_invariants(state, *data_, structure_);
  state_ = std::move(state);
  refresh();
}

void Sampler::set_data(const Dataset& data) {
  if (data.n() != data_->n() || data.p() != data_->p())
    throw DataError("replacement data must keep the same dimensions");
  data_ = &data;
  refresh();
}

void Sampler::refresh() {
  eta_mu_ = linear_predictor_mean(state_, *data_);
  eta_theta_ = linear_predictor_dispersion(state_, *data_);
  const auto ll = dexreg::log_likelihood(*data_, eta_mu_, eta_theta_, *norm_);
  if (!ll || !std::isfinite(*ll)) throw NumericalError("state lies outside the normalizer's range");
  loglik_ = *ll;
  logprior_ = dexreg::log_prior(state_, hyp_, structure_);
}

double Sampler::indicator_probability(std::span<const std::uint8_t> eligible_others) const {
  double s = 0.0;
  for (auto z : eligible_others) s += z;
  return (1.0 + s) / (static_cast<double>(eligible_others.size()) + 2.0);
}

bool Sampler::metropolis(Step step, ModelState proposal, double log_q_forward, double log_q_reverse) {
  auto& st = stats_[static_cast<std::size_t>(step)];
  ++st.proposed;
  Eigen::VectorXd em = linear_predictor_mean(proposal, *data_);
  Eigen::VectorXd et = linear_predictor_dispersion(proposal, *data_);
  const auto ll = dexreg::log_likelihood(*data_, em, et, *norm_);
  if (!ll || !std::isfinite(*ll)) return false;
  const double lp = dexreg::log_prior(proposal, hyp_, structure_);
  const double log_ratio = (*ll + lp) - (loglik_ + logprior_) + log_q_reverse - log_q_forward;
  if (!std::isfinite(log_ratio) && log_ratio != -INFINITY) return false;
  if (std::log(draw_uniform(rng_)) >= log_ratio) return false;
  state_ = std::move(proposal);
  eta_mu_ = std::move(em);
  eta_theta_ = std::move(et);
  loglik_ = *ll;
  logprior_ = lp;
  ++st.accepted;
  return true;
}

std::optional<GaussianProposal> Sampler::laplace_block(Step step, const Block& block,
                                                       const Eigen::VectorXd& start) {
  const Dataset& d = *data_;
  const Normalizer& norm = *norm_;
  const Eigen::VectorXd& other = block.side == Side::Mean ? eta_theta_ : eta_mu_;
  Objective obj = [&](const Eigen::VectorXd& psi) -> std::optional<ObjectiveValue> {
    const Eigen::VectorXd eta = block.offset + block.design * psi;
    const auto n = static_cast<Eigen::Index>(d.n());
    Eigen::VectorXd g1(n), w(n);
    double value = 0.5 * (block.prior_precision.array() * psi.array().square()).sum();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double em = block.side == Side::Mean ? eta(i) : other(i);
      const double et = block.side == Side::Mean ? other(i) : eta(i);
      const auto t = observation_terms(d, static_cast<std::size_t>(i), em, et, norm);
      if (!t) return std::nullopt;
      value -= t->value;
      g1(i) = block.side == Side::Mean ? t->d_mu : t->d_theta;
      w(i) = -(block.side == Side::Mean ? t->d2_mu : t->d2_theta);
    }
    if (!std::isfinite(value)) return std::nullopt;
    ObjectiveValue out;
    out.value = value;
    out.gradient = -block.design.transpose() * g1 + block.prior_precision.cwiseProduct(psi);
    out.hessian = block.design.transpose() * w.asDiagonal() * block.design;
    out.hessian.diagonal() += block.prior_precision;
    return out;
  };
  try {
    return laplace_approx(obj, start, cfg_);
  } catch (const NumericalError& e) {
    ++stats_[static_cast<std::size_t>(step)].skipped;
    spdlog::warn("{} update skipped: {}", step_name(step), e.what());
    return std::nullopt;
  }
}

void Sampler::sweep() {
  const std::size_t p = data_->p();
  auto guarded = [&](Step step, auto&& fn) {
    try {
      fn();
    } catch (const NumericalError& e) {
      throw NumericalError("step " + std::string(step_name(step)) + ": " + e.what());
    } catch (const GridBoundsError& e) {
      throw NumericalError("step " + std::string(step_name(step)) + ": " + e.what());
    }
  };
  guarded(Step::Intercept, [&] { step_intercept(); });
  guarded(Step::LinearMean, [&] { for (std::size_t j = 0; j < p; ++j) step_linear_mean(j); });
  guarded(Step::VarianceMean, [&] { step_variance_mean(); });
  guarded(Step::FlexibleMean, [&] { for (std::size_t j = 0; j < p; ++j) step_flexible_mean(j); });
  guarded(Step::SmoothingMean, [&] { step_smoothing_mean(); });
  guarded(Step::Interaction, [&] { for (std::size_t k = 0; k < data_->pairs(); ++k) step_interaction(k); });
  guarded(Step::Dispersion, [&] { step_dispersion(); });
  guarded(Step::VarianceDispersion, [&] { step_variance_dispersion(); });
  guarded(Step::FlexibleDispersion, [&] { for (std::size_t j = 0; j < p; ++j) step_flexible_dispersion(j); });
  guarded(Step::SmoothingDispersion, [&] { step_smoothing_dispersion(); });
  if (options_.check_invariants) check_invariants(state_, *data_, structure_);
}

void Sampler::step_intercept() {
  const auto n = static_cast<Eigen::Index>(data_->n());
  Block b{Side::Mean, Eigen::MatrixXd::Ones(n, 1), eta_mu_.array() - state_.beta0_mu,
          Eigen::VectorXd::Constant(1, 1.0 / hyp_.beta0_var)};
  const Eigen::VectorXd cur = Eigen::VectorXd::Constant(1, state_.beta0_mu);
  const auto fwd = laplace_block(Step::Intercept, b, cur);
  if (!fwd) return;
  const Eigen::VectorXd prop = fwd->draw(rng_);
  const auto rev = laplace_block(Step::Intercept, b, prop);
  if (!rev) return;
  ModelState next = state_;
  next.beta0_mu = prop(0);
  metropolis(Step::Intercept, std::move(next), fwd->log_density(prop), rev->log_density(cur));
}

void Sampler::step_linear_mean(std::size_t j) {
  const auto jj = static_cast<Eigen::Index>(j);
  const std::uint8_t cur_j = state_.J_mu[j];
  std::uint8_t new_j = cur_j;
  double log_q_fwd = 0.0, log_q_rev = 0.0;
  if (structure_.linear_mean == IndicatorMode::Free && !state_.K_mu[j]) {
    std::vector<std::uint8_t> others(state_.J_mu);
    others.erase(others.begin() + static_cast<std::ptrdiff_t>(j));
    const double pr = indicator_probability(others);
    new_j = draw_bernoulli(rng_, pr) ? 1 : 0;
    log_q_fwd += std::log(new_j ? pr : 1.0 - pr);
    log_q_rev += std::log(cur_j ? pr : 1.0 - pr);
  }
  if (!cur_j && !new_j) return;

  const double beta = state_.beta_mu(jj);
  Block b{Side::Mean, data_->x.col(jj), eta_mu_ - beta * data_->x.col(jj),
          Eigen::VectorXd::Constant(1, 1.0 / state_.b_mu)};
  double prop = 0.0;
  if (new_j) {
    const auto fwd = laplace_block(Step::LinearMean, b, Eigen::VectorXd::Constant(1, beta));
    if (!fwd) return;
    const Eigen::VectorXd v = fwd->draw(rng_);
    prop = v(0);
    log_q_fwd += fwd->log_density(v);
  }
  if (cur_j) {
    const auto rev = laplace_block(Step::LinearMean, b, Eigen::VectorXd::Constant(1, prop));
    if (!rev) return;
    log_q_rev += rev->log_density(Eigen::VectorXd::Constant(1, beta));
  }
  ModelState next = state_;
  next.J_mu[j] = new_j;
  next.beta_mu(jj) = prop;
  metropolis(Step::LinearMean, std::move(next), log_q_fwd, log_q_rev);
}

void Sampler::step_variance_mean() {
  if (!options_.update_b_mu) return;
  state_.b_mu = gibbs_b_mu(state_, hyp_, rng_);
  logprior_ = dexreg::log_prior(state_, hyp_, structure_);
}

void Sampler::step_flexible_mean(std::size_t j) { flexible_step(Step::FlexibleMean, Side::Mean, j, false); }

void Sampler::step_interaction(std::size_t k) { flexible_step(Step::Interaction, Side::Mean, k, true); }

void Sampler::step_flexible_dispersion(std::size_t j) {
  flexible_step(Step::FlexibleDispersion, Side::Dispersion, j, false);
}

void Sampler::flexible_step(Step step, Side side, std::size_t j, bool is_interaction) {
  const auto jj = static_cast<Eigen::Index>(j);
  const std::size_t p = state_.p();
  std::vector<std::uint8_t>* ks = nullptr;
  Eigen::VectorXd* cs = nullptr;
  std::vector<Eigen::VectorXd>* alphas = nullptr;
  const Eigen::MatrixXd* w = nullptr;
  IndicatorMode mode{};
  bool eligible = false, forced_on = false;
  std::vector<std::uint8_t> others;

  if (is_interaction) {
    const auto& ib = data_->interactions[j];
    ks = &state_.K_int;
    cs = &state_.c_int;
    alphas = &state_.alpha_int;
    w = &ib.basis.w_matrix;
    mode = structure_.interactions;
    eligible = state_.K_mu[ib.j] && state_.K_mu[ib.k];
    for (std::size_t k = 0; k < data_->pairs(); ++k) {
      const auto& o = data_->interactions[k];
      if (k != j && state_.K_mu[o.j] && state_.K_mu[o.k]) others.push_back(state_.K_int[k]);
    }
  } else if (side == Side::Mean) {
    ks = &state_.K_mu;
    cs = &state_.c_mu;
    alphas = &state_.alpha_mu;
    w = &data_->bases[j].w_matrix;
    mode = structure_.flexible_mean;
    eligible = state_.J_mu[j];
    for (std::size_t k = 0; k < data_->pairs(); ++k) {
      const auto& o = data_->interactions[k];
      if (state_.K_int[k] && (o.j == j || o.k == j)) forced_on = true;
    }
    for (std::size_t k = 0; k < p; ++k)
      if (k != j && state_.J_mu[k]) others.push_back(state_.K_mu[k]);
  } else {
    ks = &state_.K_theta;
    cs = &state_.c_theta;
    alphas = &state_.alpha_theta;
    w = &data_->bases[j].w_matrix;
    mode = structure_.flexible_dispersion;
    eligible = state_.J_theta;
    for (std::size_t k = 0; k < p; ++k)
      if (k != j) others.push_back(state_.K_theta[k]);
  }
  if (!eligible) return;

  const std::uint8_t cur_k = (*ks)[j];
  std::uint8_t new_k = cur_k;
  double log_q_fwd = 0.0, log_q_rev = 0.0;
  if (mode == IndicatorMode::Free && !forced_on) {
    const double pr = indicator_probability(others);
    new_k = draw_bernoulli(rng_, pr) ? 1 : 0;
    log_q_fwd += std::log(new_k ? pr : 1.0 - pr);
    log_q_rev += std::log(cur_k ? pr : 1.0 - pr);
  }
  if (!cur_k && !new_k) return;

  const double cur_c = (*cs)(jj);
  const Eigen::VectorXd cur_alpha = (*alphas)[j];
  const Eigen::VectorXd& eta = side == Side::Mean ? eta_mu_ : eta_theta_;
  Block b{side, *w, eta - *w * cur_alpha, Eigen::VectorXd::Zero(w->cols())};
  const auto q1 = laplace_block(step, b, Eigen::VectorXd::Zero(w->cols()));
  if (!q1) return;
  const double ac = side == Side::Mean ? state_.ac_mu : state_.ac_theta;
  const double bc = side == Side::Mean ? state_.bc_mu : state_.bc_theta;
  std::optional<MarginalSmoothing> ms;
  try {
    ms.emplace(*q1, ac, bc, cfg_);
  } catch (const NumericalError& e) {
    ++stats_[static_cast<std::size_t>(step)].skipped;
    spdlog::warn("{} update skipped: {}", step_name(step), e.what());
    return;
  }

  double new_c = 0.0;
  Eigen::VectorXd new_alpha = Eigen::VectorXd::Zero(w->cols());
  if (options_.fix_smoothing) {
    new_c = cur_c;
    new_alpha = ms->draw_alpha(cur_c, rng_);
    log_q_fwd += ms->alpha_log_density(cur_c, new_alpha);
    log_q_rev += ms->alpha_log_density(cur_c, cur_alpha);
  } else {
    if (new_k) {
      std::tie(new_c, new_alpha) = ms->draw(rng_);
      log_q_fwd += ms->log_density(new_c, new_alpha);
    }
    if (cur_k) log_q_rev += ms->log_density(cur_c, cur_alpha);
  }

  ModelState next = state_;
  auto& nk = is_interaction ? next.K_int : side == Side::Mean ? next.K_mu : next.K_theta;
  auto& nc = is_interaction ? next.c_int : side == Side::Mean ? next.c_mu : next.c_theta;
  auto& na = is_interaction ? next.alpha_int : side == Side::Mean ? next.alpha_mu : next.alpha_theta;
  nk[j] = new_k;
  nc(jj) = new_c;
  na[j] = std::move(new_alpha);
  metropolis(step, std::move(next), log_q_fwd, log_q_rev);
}

void Sampler::step_smoothing_mean() {
  if (options_.fix_smoothing) return;
  state_.ac_mu = gibbs_ac(state_, hyp_, Side::Mean, rng_);
  state_.bc_mu = gibbs_bc(state_, hyp_, Side::Mean, rng_);
  logprior_ = dexreg::log_prior(state_, hyp_, structure_);
}

void Sampler::step_dispersion() {
  const auto n = static_cast<Eigen::Index>(data_->n());
  const auto p = static_cast<Eigen::Index>(data_->p());
  const std::uint8_t cur_j = state_.J_theta;
  std::uint8_t new_j = cur_j;
  double log_q_fwd = 0.0, log_q_rev = 0.0;
  const bool any_flexible = std::any_of(state_.K_theta.begin(), state_.K_theta.end(), [](auto z) { return z; });
  if (structure_.dispersion == IndicatorMode::Free && !any_flexible) {
    const double pr = hyp_.p_Jtheta;
    new_j = draw_bernoulli(rng_, pr) ? 1 : 0;
    log_q_fwd += std::log(new_j ? pr : 1.0 - pr);
    log_q_rev += std::log(cur_j ? pr : 1.0 - pr);
  }
  if (!cur_j && !new_j) return;

  Eigen::MatrixXd design(n, p + 1);
  design.col(0).setOnes();
  design.rightCols(p) = data_->x;
  const Eigen::VectorXd cur = state_.beta_theta;
  Block b{Side::Dispersion, design, eta_theta_ - design * cur,
          Eigen::VectorXd::Constant(p + 1, 1.0 / state_.b_theta)};
  Eigen::VectorXd prop = Eigen::VectorXd::Zero(p + 1);
  if (new_j) {
    const auto fwd = laplace_block(Step::Dispersion, b, cur);
    if (!fwd) return;
    prop = fwd->draw(rng_);
    log_q_fwd += fwd->log_density(prop);
  }
  if (cur_j) {
    const auto rev = laplace_block(Step::Dispersion, b, prop);
    if (!rev) return;
    log_q_rev += rev->log_density(cur);
  }
  ModelState next = state_;
  next.J_theta = new_j;
  next.beta_theta = prop;
  metropolis(Step::Dispersion, std::move(next), log_q_fwd, log_q_rev);
}

void Sampler::step_variance_dispersion() {
  if (!options_.update_b_theta) return;
  state_.b_theta = gibbs_b_theta(state_, hyp_, rng_);
  logprior_ = dexreg::log_prior(state_, hyp_, structure_);
}

void Sampler::step_smoothing_dispersion() {
  if (options_.fix_smoothing) return;
  state_.ac_theta = gibbs_ac(state_, hyp_, Side::Dispersion, rng_);
  state_.bc_theta = gibbs_bc(state_, hyp_, Side::Dispersion, rng_);
  logprior_ = dexreg::log_prior(state_, hyp_, structure_);
}

ChainResult run_chain(const Dataset& data, const Normalizer& norm, const Hyperparameters& hyp,
                      const ModelStructure& structure, const McmcConfig& cfg, const SamplerOptions& options,
                      std::optional<ModelState> init) {
  cfg.validate();
  ModelState start = init ? std::move(*init) : initial_state(data, hyp, structure);
  Sampler sampler(data, norm, hyp, structure, cfg, options, std::move(start), cfg.seed);
  ChainResult out;
  const std::size_t total = cfg.burn_in + cfg.iterations;
  out.states.reserve(cfg.iterations / cfg.thin);
  for (std::size_t it = 1; it <= total; ++it) {
    try {
      sampler.sweep();
    } catch (const NumericalError& e) {
      throw NumericalError("sampler aborted at iteration " + std::to_string(it) + ", " + e.what());
    }
    if (it > cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) {
      out.states.push_back(sampler.state());
      out.iterations.push_back(it);
      out.log_likelihood.push_back(sampler.log_likelihood());
    }
  }
  out.stats = sampler.stats();
  return out;
}

}  // namespace dexreg
