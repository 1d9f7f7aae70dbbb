#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <cmath>
#include <numbers>
#include <vector>

#include "dexreg/error.hpp"
#include "dexreg/model.hpp"

using namespace dexreg;

namespace {

const ExponentialFamily kPoisson{Family::Poisson, 1.0};
const ExponentialFamily kGaussian{Family::Gaussian, 1.0};

std::vector<std::vector<double>> random_covariates(std::size_t n, std::size_t p, Rng& rng) {
  std::vector<std::vector<double>> cols(p, std::vector<double>(n));
  for (auto& c : cols)
    for (auto& v : c) v = draw_uniform(rng) * 3.0 - 1.0;
  return cols;
}

Dataset poisson_data(std::size_t n, std::size_t p, std::uint64_t seed, bool interactions = false) {
  Rng rng(seed);
  auto cols = random_covariates(n, p, rng);
  std::vector<double> y(n);
  for (auto& v : y) v = std::floor(draw_uniform(rng) * 6.0);
  return Dataset::build(kPoisson, y, {}, cols, 0.98, interactions);
}

// A state with every block active and random values.
ModelState busy_state(const Dataset& d, Rng& rng) {
  ModelState s = initial_state(d, Hyperparameters{});
  s.beta0_mu = 0.4;
  for (std::size_t j = 0; j < d.p(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    s.J_mu[j] = s.K_mu[j] = s.K_theta[j] = 1;
    s.beta_mu(jj) = draw_normal(rng, 0.0, 0.3);
    s.c_mu(jj) = draw_normal(rng);
    s.c_theta(jj) = draw_normal(rng);
    for (auto& e : s.alpha_mu[j]) e = draw_normal(rng, 0.0, 0.5);
    for (auto& e : s.alpha_theta[j]) e = draw_normal(rng, 0.0, 0.5);
  }
  s.J_theta = 1;
  for (auto& e : s.beta_theta) e = draw_normal(rng, 0.0, 0.3);
  s.b_mu = 2.0;
  s.bc_mu = 1.5;
  s.b_theta = 0.7;
  s.bc_theta = 3.0;
  s.ac_mu = -0.4;
  s.ac_theta = 0.9;
  return s;
}

double log_normal_oracle(double x, double m, double v) {
  return -0.5 * std::log(2 * std::numbers::pi * v) - (x - m) * (x - m) / (2 * v);
}

double log_ig_oracle(double x, double a, double b) {
  return a * std::log(b) - std::lgamma(a) - (a + 1) * std::log(x) - b / x;
}

}  // namespace

TEST_CASE("dataset construction") {
  const auto d = poisson_data(30, 3, 1);
  CHECK(d.n() == 30);
  CHECK(d.p() == 3);
  for (Eigen::Index j = 0; j < 3; ++j) {
    CHECK(std::abs(d.x.col(j).mean()) < 1e-12);
    CHECK(d.x.col(j).squaredNorm() / 30.0 == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(Dataset::build(kPoisson, {1.0, -2.0}, {}, {}), DataError);
  CHECK_THROWS_AS(Dataset::build(kPoisson, {1.0, 2.0}, {}, {{1.0, 2.0, 3.0}}), DataError);
  CHECK_THROWS_AS(Dataset::build(ExponentialFamily{Family::Binomial, 1.0}, {0.5}, {Weight{3.0}}, {}),
                  DataError);
  const auto with_pairs = poisson_data(30, 3, 1, true);
  REQUIRE(with_pairs.pairs() == 3);
  CHECK(with_pairs.interactions[2].j == 1);
  CHECK(with_pairs.interactions[2].k == 2);
  const auto empty = Dataset::build(kPoisson, {}, {}, {});
  CHECK(empty.n() == 0);
  CHECK(empty.p() == 0);
}

TEST_CASE("mean linear predictor") {
  const auto d = poisson_data(25, 2, 2);
  ModelState s = initial_state(d, Hyperparameters{});
  s.beta0_mu = 0.3;
  CHECK(linear_predictor_mean(s, d).isApprox(Eigen::VectorXd::Constant(25, 0.3)));
  s.J_mu[0] = 1;
  s.beta_mu(0) = 2.0;
  Eigen::VectorXd eta = linear_predictor_mean(s, d);
  for (Eigen::Index i = 0; i < 25; ++i) CHECK(eta(i) == doctest::Approx(0.3 + 2.0 * d.x(i, 0)));
  s.K_mu[0] = 1;
  for (auto& e : s.alpha_mu[0]) e = 0.7;
  eta = linear_predictor_mean(s, d);
  for (Eigen::Index i = 0; i < 25; ++i) {
    double f = 0.0;
    for (Eigen::Index c = 0; c < d.bases[0].w_matrix.cols(); ++c) f += d.bases[0].w_matrix(i, c) * 0.7;
    CHECK(std::abs(eta(i) - (0.3 + 2.0 * d.x(i, 0) + f)) < 1e-12);
  }
}

TEST_CASE("dispersion linear predictor") {
  const auto d = poisson_data(25, 2, 3);
  ModelState s = initial_state(d, Hyperparameters{});
  CHECK(linear_predictor_dispersion(s, d).isZero(0.0));
  s.J_theta = 1;
  s.beta_theta(0) = 0.5;
  CHECK(linear_predictor_dispersion(s, d).isApprox(Eigen::VectorXd::Constant(25, 0.5)));
  s.beta_theta(2) = -0.25;
  s.K_theta[1] = 1;
  for (auto& e : s.alpha_theta[1]) e = -0.3;
  const Eigen::VectorXd eta = linear_predictor_dispersion(s, d);
  for (Eigen::Index i = 0; i < 25; ++i) {
    double f = 0.0;
    for (Eigen::Index c = 0; c < d.bases[1].w_matrix.cols(); ++c) f -= 0.3 * d.bases[1].w_matrix(i, c);
    CHECK(std::abs(eta(i) - (0.5 - 0.25 * d.x(i, 1) + f)) < 1e-12);
  }
}

TEST_CASE("log-likelihood") {
  // Gaussian with θ ≡ 1 is the ordinary Gaussian log-likelihood.
  Rng rng(4);
  auto cols = random_covariates(12, 1, rng);
  std::vector<double> y(12);
  for (auto& v : y) v = draw_normal(rng);
  const auto g = Dataset::build(kGaussian, y, {}, cols);
  ModelState s = initial_state(g, Hyperparameters{});
  s.J_mu[0] = 1;
  s.beta_mu(0) = 0.8;
  double ref = 0.0;
  for (std::size_t i = 0; i < 12; ++i)
    ref += log_normal_oracle(y[i], s.beta0_mu + 0.8 * g.x(static_cast<Eigen::Index>(i), 0), 1.0);
  const ExactNormalizer gnorm(kGaussian);
  CHECK(std::abs(log_likelihood(s, g, gnorm) - ref) < 1e-10);

  // Single observation.
  const auto one = Dataset::build(kPoisson, {3.0}, {}, {});
  ModelState so = initial_state(one, Hyperparameters{});
  so.beta0_mu = 1.1;
  so.J_theta = 1;
  so.beta_theta(0) = -0.4;
  const ExactNormalizer pnorm(kPoisson);
  CHECK(log_likelihood(so, one, pnorm) ==
        doctest::Approx(log_double_density(kPoisson, pnorm, 3.0, std::exp(1.1), std::exp(-0.4), {}))
            .epsilon(1e-13));

  // Five Poisson observations against a hand-rolled brute-force sum.
  const auto d = poisson_data(5, 1, 5);
  Rng r2(6);
  ModelState sp = busy_state(d, r2);
  const Eigen::VectorXd em = linear_predictor_mean(sp, d), et = linear_predictor_dispersion(sp, d);
  double oracle = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double mu = std::exp(em(ii)), theta = std::exp(et(ii));
    oracle += brute_force_log_Z(kPoisson, mu, theta, {}, 1000) + 0.5 * std::log(theta) +
              theta * log_density(kPoisson, d.y[i], mu, {}) +
              (1 - theta) * log_saturated_density(kPoisson, d.y[i], {});
  }
  CHECK(std::abs(log_likelihood(sp, d, pnorm) - oracle) < 1e-6);

  // Out of grid range is reported with the observation.
  const auto grid = build_grid(kPoisson, [] {
    GridConfig c;
    c.link_mu_min = c.link_theta_min = -2;
    c.link_mu_max = c.link_theta_max = 2;
    c.link_mu_step = c.link_theta_step = 0.5;
    return c;
  }());
  sp.beta0_mu = 5.0;
  CHECK_THROWS_AS(log_likelihood(sp, d, grid), GridBoundsError);
}

TEST_CASE("observation derivatives match finite differences") {
  const auto d = poisson_data(4, 1, 8);
  const ExactNormalizer norm(kPoisson);
  const double h = 1e-5;
  for (std::size_t i = 0; i < 4; ++i) {
    for (auto [em, et] : {std::pair{0.3, -0.5}, std::pair{1.4, 0.8}}) {
      auto f = [&](double a, double b) { return observation_terms(d, i, a, b, norm)->value; };
      const auto t = *observation_terms(d, i, em, et, norm);
      CHECK(t.d_mu == doctest::Approx((f(em + h, et) - f(em - h, et)) / (2 * h)).epsilon(1e-6));
      CHECK(t.d_theta == doctest::Approx((f(em, et + h) - f(em, et - h)) / (2 * h)).epsilon(1e-6));
      const double h2 = 1e-4;
      CHECK(t.d2_mu == doctest::Approx((f(em + h2, et) - 2 * t.value + f(em - h2, et)) / (h2 * h2)).epsilon(1e-4));
      CHECK(t.d2_theta == doctest::Approx((f(em, et + h2) - 2 * t.value + f(em, et - h2)) / (h2 * h2)).epsilon(1e-4));
    }
  }
}

TEST_CASE("indicator prior") {
  const std::vector<std::uint8_t> one{1, 0, 0}, none{0, 0, 0};
  CHECK(log_beta_indicator_prior(one) == doctest::Approx(std::log(1.0 / 12.0)).epsilon(1e-14));
  CHECK(log_beta_indicator_prior(one) == doctest::Approx(-2.4849).epsilon(1e-4));
  CHECK(log_beta_indicator_prior(none) == doctest::Approx(std::log(0.25)).epsilon(1e-14));
  CHECK(log_beta_indicator_prior({}) == 0.0);
}

TEST_CASE("log prior against a term-by-term oracle") {
  const auto d = poisson_data(20, 2, 9);
  Rng rng(10);
  ModelState s = busy_state(d, rng);
  s.K_theta[1] = 0;
  s.c_theta(1) = 0.0;
  s.alpha_theta[1].setZero();
  const Hyperparameters hyp;
  double ref = log_normal_oracle(s.beta0_mu, 0, 1e10);
  for (double b : {s.b_mu, s.bc_mu, s.b_theta, s.bc_theta}) ref += log_ig_oracle(b, 101, 10100);
  ref += log_normal_oracle(s.ac_mu, 0, 100) + log_normal_oracle(s.ac_theta, 0, 100);
  for (Eigen::Index j = 0; j < 2; ++j) {
    ref += log_normal_oracle(s.beta_mu(j), 0, s.b_mu);
    ref += log_normal_oracle(s.c_mu(j), s.ac_mu, s.bc_mu);
    for (double a : s.alpha_mu[j]) ref += log_normal_oracle(a, 0, std::exp(s.c_mu(j)));
  }
  for (double b : s.beta_theta) ref += log_normal_oracle(b, 0, s.b_theta);
  ref += log_normal_oracle(s.c_theta(0), s.ac_theta, s.bc_theta);
  for (double a : s.alpha_theta[0]) ref += log_normal_oracle(a, 0, std::exp(s.c_theta(0)));
  ref += std::log(1.0 / 3.0);   // J_mu = (1,1): B(3,1)
  ref += std::log(1.0 / 3.0);   // K_mu = (1,1) over two eligible
  ref += std::log(0.5);         // J_theta
  ref += std::log(1.0 / 6.0);   // K_theta = (1,0): B(2,2)
  CHECK(log_prior(s, hyp) == doctest::Approx(ref).epsilon(1e-12));

  // Fixed groups contribute nothing.
  ModelStructure fixed;
  fixed.dispersion = IndicatorMode::FixedOn;
  CHECK(log_prior(s, hyp, fixed) == doctest::Approx(ref - std::log(0.5)).epsilon(1e-12));

  ModelState bad = s;
  bad.J_mu[0] = 0;
  CHECK_THROWS_AS(log_prior(bad, hyp), InvariantError);
  bad = s;
  bad.J_theta = 0;
  CHECK_THROWS_AS(log_prior(bad, hyp), InvariantError);
}

TEST_CASE("interaction indicator prior over eligible pairs") {
  const auto d = poisson_data(20, 3, 11, true);
  ModelState s = initial_state(d, Hyperparameters{});
  const Hyperparameters hyp;
  ModelStructure st;
  st.interactions = IndicatorMode::Free;
  const double base = log_prior(s, hyp, st);
  for (std::size_t j : {0, 1}) {
    s.J_mu[j] = s.K_mu[j] = 1;
  }
  s.K_int[0] = 1;  // pair (0, 1), the only eligible pair
  s.c_int(0) = 0.2;
  s.alpha_int[0].setConstant(0.1);
  double expected = log_prior(s, hyp, st);
  ModelState off = s;
  off.K_int[0] = 0;
  off.c_int(0) = 0;
  off.alpha_int[0].setZero();
  double flex = log_normal_oracle(0.2, s.ac_mu, s.bc_mu);
  for (double a : s.alpha_int[0]) flex += log_normal_oracle(a, 0, std::exp(0.2));
  // B(2,1) versus B(1,2): equal, so only the block densities differ.
  CHECK(expected - log_prior(off, hyp, st) == doctest::Approx(flex).epsilon(1e-12));
  CHECK(base != expected);
  ModelState bad = s;
  bad.K_int[1] = 1;  // pair (0, 2) with K_mu[2] = 0
  CHECK_THROWS_AS(check_invariants(bad, d), InvariantError);
}

TEST_CASE("inverse gamma moments by quadrature") {
  using boost::math::quadrature::exp_sinh;
  for (auto [s, t, mean, sd] : {std::tuple{101.0, 10100.0, 101.0, 10.15},
                                std::tuple{6.0, 500.0, 100.0, 50.0},
                                std::tuple{27.0, 1300.0, 50.0, 10.0}}) {
    exp_sinh<double> integrator;
    auto dens = [&](double x) { return std::exp(log_inverse_gamma(x, s, t)); };
    const double m0 = integrator.integrate(dens);
    const double m1 = integrator.integrate([&](double x) { return x * dens(x); });
    const double m2 = integrator.integrate([&](double x) { return x * x * dens(x); });
    CHECK(m0 == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(m1 == doctest::Approx(mean).epsilon(5e-3));
    CHECK(std::sqrt(m2 - m1 * m1) == doctest::Approx(sd).epsilon(5e-3));
  }
}

TEST_CASE("effect kinds") {
  const auto d = poisson_data(10, 1, 12);
  ModelState s = initial_state(d, Hyperparameters{});
  CHECK(effect_kind_mean(s, 0) == EffectKind::Null);
  s.J_mu[0] = 1;
  CHECK(effect_kind_mean(s, 0) == EffectKind::Linear);
  s.K_mu[0] = 1;
  CHECK(effect_kind_mean(s, 0) == EffectKind::Flexible);
  CHECK(effect_kind_dispersion(s, 0) == EffectKind::Null);
  s.J_theta = 1;
  CHECK(effect_kind_dispersion(s, 0) == EffectKind::Linear);
  s.K_theta[0] = 1;
  CHECK(effect_kind_dispersion(s, 0) == EffectKind::Flexible);
  CHECK_THROWS_AS(effect_kind_mean(s, 1), DomainError);
}

TEST_CASE("relabeling covariates leaves the posterior unchanged") {
  Rng rng(13);
  auto cols = random_covariates(30, 2, rng);
  std::vector<double> y(30);
  for (auto& v : y) v = std::floor(draw_uniform(rng) * 5.0);
  const auto d = Dataset::build(kPoisson, y, {}, cols);
  const auto swapped = Dataset::build(kPoisson, y, {}, {cols[1], cols[0]});
  ModelState s = busy_state(d, rng);
  s.K_theta[0] = 0;
  s.c_theta(0) = 0;
  s.alpha_theta[0].setZero();
  ModelState t = s;
  std::swap(t.beta_mu(0), t.beta_mu(1));
  std::swap(t.J_mu[0], t.J_mu[1]);
  std::swap(t.K_mu[0], t.K_mu[1]);
  std::swap(t.alpha_mu[0], t.alpha_mu[1]);
  std::swap(t.c_mu(0), t.c_mu(1));
  std::swap(t.beta_theta(1), t.beta_theta(2));
  std::swap(t.K_theta[0], t.K_theta[1]);
  std::swap(t.alpha_theta[0], t.alpha_theta[1]);
  std::swap(t.c_theta(0), t.c_theta(1));
  const ExactNormalizer norm(kPoisson);
  const Hyperparameters hyp;
  const double a = log_likelihood(s, d, norm) + log_prior(s, hyp);
  const double b = log_likelihood(t, swapped, norm) + log_prior(t, hyp);
  CHECK(a == doctest::Approx(b).epsilon(1e-10));
}

TEST_CASE("prior draws respect the constraints") {
  const auto d = poisson_data(15, 3, 14, true);
  Hyperparameters hyp;
  hyp.s = 10;
  hyp.t = 2.25;
  ModelStructure st;
  st.interactions = IndicatorMode::Free;
  Rng rng(15);
  int jt = 0;
  constexpr int kDraws = 20000;
  for (int k = 0; k < kDraws; ++k) {
    const auto s = draw_prior(d, hyp, st, rng);
    check_invariants(s, d, st);
    jt += s.J_theta;
  }
  CHECK(std::abs(jt / double(kDraws) - 0.5) < 3 * std::sqrt(0.25 / kDraws));
  const auto gam = ModelStructure::gam();
  for (int k = 0; k < 100; ++k) CHECK(draw_prior(d, hyp, gam, rng).J_theta == 0);
  const auto full = ModelStructure::no_selection(true, true);
  const auto s = draw_prior(d, hyp, full, rng);
  check_invariants(s, d, full);
  CHECK(s.K_int == std::vector<std::uint8_t>{1, 1, 1});
  ModelStructure bad;
  bad.flexible_mean = IndicatorMode::FixedOn;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("predictors at new points reproduce the design") {
  const auto d = poisson_data(25, 3, 16, true);
  Rng rng(17);
  ModelState s = busy_state(d, rng);
  s.K_int = {1, 0, 1};
  s.c_int << 0.3, 0.0, -0.2;
  for (std::size_t k : {0, 2})
    for (auto& e : s.alpha_int[k]) e = draw_normal(rng, 0.0, 0.5);
  ModelStructure st;
  st.interactions = IndicatorMode::Free;
  check_invariants(s, d, st);
  const Eigen::VectorXd em = linear_predictor_mean(s, d), et = linear_predictor_dispersion(s, d);
  for (std::size_t i = 0; i < d.n(); ++i) {
    std::vector<double> raw(3);
    for (std::size_t j = 0; j < 3; ++j) raw[j] = d.covariates[j].raw[i];
    const auto [a, b] = linear_predictors_at(s, d, raw);
    CHECK(std::abs(a - em(static_cast<Eigen::Index>(i))) < 1e-9);
    CHECK(std::abs(b - et(static_cast<Eigen::Index>(i))) < 1e-9);
  }
  CHECK_THROWS_AS(linear_predictors_at(s, d, std::vector<double>{1.0}), DomainError);
}
