#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "dexreg/error.hpp"
#include "dexreg/expfam.hpp"

using namespace dexreg;

namespace {

const ExponentialFamily kPoisson{Family::Poisson, 1.0};
const ExponentialFamily kBinomial{Family::Binomial, 1.0};
const ExponentialFamily kGaussian{Family::Gaussian, 1.0};

}  // namespace

TEST_CASE("log_density matches closed-form pmfs") {
  CHECK(log_density(kPoisson, 2.0, 3.0, {}) ==
        doctest::Approx(2.0 * std::log(3.0) - 3.0 - std::log(2.0)).epsilon(1e-14));
  CHECK(log_density(kPoisson, 2.0, 3.0, {}) == doctest::Approx(-1.49591).epsilon(1e-5));
  CHECK(log_density(kBinomial, 0.0, 0.5, {4.0}) == doctest::Approx(4.0 * std::log(0.5)));
  CHECK(log_density(kGaussian, 0.0, 0.0, {}) ==
        doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-15));
  // 3 successes of 4 at p = 0.3: C(4,3) 0.3^3 0.7
  CHECK(std::exp(log_density(kBinomial, 0.75, 0.3, {4.0})) ==
        doctest::Approx(4.0 * 0.027 * 0.7).epsilon(1e-13));
}

TEST_CASE("canonical and mean parameters are inverse") {
  CHECK(canonical_param(kPoisson, 3.0) == doctest::Approx(std::log(3.0)));
  CHECK(canonical_param(kBinomial, 0.5) == 0.0);
  CHECK(canonical_param(kGaussian, 1.7) == 1.7);
  for (double mu : {1e-3, 0.2, 3.0, 250.0})
    CHECK(std::abs(mean_param(kPoisson, canonical_param(kPoisson, mu)) - mu) <= 1e-12 * mu);
  for (double mu : {1e-4, 0.1, 0.5, 0.93})
    CHECK(std::abs(mean_param(kBinomial, canonical_param(kBinomial, mu)) - mu) <= 1e-12);
  for (double mu : {-4.0, 0.0, 1.7})
    CHECK(mean_param(kGaussian, canonical_param(kGaussian, mu)) == mu);
}

TEST_CASE("variance_function") {
  CHECK(variance_function(kPoisson, 3.0, {}) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(variance_function(kBinomial, 0.25, {4.0}) == doctest::Approx(0.046875).epsilon(1e-14));
  CHECK(variance_function(kGaussian, 0.0, {}) == 1.0);
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(log_density(kPoisson, 2.0, -1.0, {}), DomainError);
  CHECK_THROWS_AS(log_density(kPoisson, 2.5, 1.0, {}), DomainError);
  CHECK_THROWS_AS(log_density(kPoisson, -1.0, 1.0, {}), DomainError);
  CHECK_THROWS_AS(log_density(kBinomial, 0.3, 0.5, {4.0}), DomainError);
  CHECK_THROWS_AS(log_density(kBinomial, 0.5, 1.0, {4.0}), DomainError);
  CHECK_THROWS_AS(log_density(kBinomial, 0.5, 0.5, {2.5}), DomainError);
  CHECK_THROWS_AS(canonical_param(kBinomial, 0.0), DomainError);
  CHECK_THROWS_AS(variance_function(kPoisson, 0.0, {}), DomainError);
  CHECK_THROWS_AS(parse_family("gamma"), ConfigError);
  CHECK(parse_family("binomial") == Family::Binomial);
}

TEST_CASE("cumulant derivatives agree with central differences") {
  for (const auto* fam : {&kPoisson, &kBinomial, &kGaussian}) {
    for (double psi : {-2.0, -0.3, 0.0, 0.8, 2.5}) {
      for (double h : {1e-4, 1e-5}) {
        const double d1 = (fam->cumulant(psi + h) - fam->cumulant(psi - h)) / (2 * h);
        const double d2 = (fam->cumulant_d1(psi + h) - fam->cumulant_d1(psi - h)) / (2 * h);
        CHECK(d1 == doctest::Approx(fam->cumulant_d1(psi)).epsilon(1e-7));
        CHECK(d2 == doctest::Approx(fam->cumulant_d2(psi)).epsilon(1e-7));
      }
      CHECK(fam->cumulant_d2(psi) > 0.0);
    }
  }
}

TEST_CASE("discrete densities sum to one") {
  for (double mu : {0.05, 3.0, 40.0, 200.0}) {
    double total = 0.0;
    for (int y = 0; y <= 1000; ++y) total += std::exp(log_density(kPoisson, y, mu, {}));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
  }
  for (int n : {1, 4, 17, 60}) {
    for (double mu : {0.02, 0.5, 0.87}) {
      double total = 0.0;
      for (int k = 0; k <= n; ++k)
        total += std::exp(log_density(kBinomial, double(k) / n, mu, {double(n)}));
      CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("saturated density uses boundary limits") {
  CHECK(log_saturated_density(kPoisson, 0.0, {}) == 0.0);
  CHECK(log_saturated_density(kBinomial, 0.0, {5.0}) == doctest::Approx(0.0));
  CHECK(log_saturated_density(kBinomial, 1.0, {5.0}) == doctest::Approx(0.0));
  CHECK(log_saturated_density(kPoisson, 4.0, {}) == doctest::Approx(log_density(kPoisson, 4.0, 4.0, {})));
  CHECK(log_saturated_density(kGaussian, 1.3, {}) ==
        doctest::Approx(-0.5 * std::log(2 * std::numbers::pi)));
}

TEST_CASE("simulated moments match mean and variance function") {
  std::mt19937_64 rng(20240611);
  constexpr int kDraws = 1'000'000;
  auto check = [&](auto&& draw, double mean, double var) {
    double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    std::vector<double> xs(kDraws);
    for (auto& x : xs) x = draw();
    for (double x : xs) s1 += x;
    const double m = s1 / kDraws;
    for (double x : xs) {
      const double d = x - m;
      s2 += d * d;
      s4 += d * d * d * d;
      s3 += d;
    }
    const double v = s2 / (kDraws - 1);
    const double se_mean = std::sqrt(v / kDraws);
    const double se_var = std::sqrt((s4 / kDraws - v * v) / kDraws);
    CHECK(std::abs(m - mean) < 5 * se_mean);
    CHECK(std::abs(v - var) < 5 * se_var);
  };
  std::poisson_distribution<int> pois(3.0);
  check([&] { return double(pois(rng)); }, 3.0, variance_function(kPoisson, 3.0, {}));
  std::binomial_distribution<int> binom(4, 0.25);
  check([&] { return binom(rng) / 4.0; }, 0.25, variance_function(kBinomial, 0.25, {4.0}));
  std::normal_distribution<double> norm(0.4, 1.0);
  check([&] { return norm(rng); }, 0.4, variance_function(kGaussian, 0.4, {}));
}
