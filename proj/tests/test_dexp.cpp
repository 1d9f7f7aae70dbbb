#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "dexreg/dexp.hpp"
#include "dexreg/error.hpp"

using namespace dexreg;

namespace {

const ExponentialFamily kPoisson{Family::Poisson, 1.0};
const ExponentialFamily kBinomial{Family::Binomial, 1.0};
const ExponentialFamily kGaussian{Family::Gaussian, 1.0};

GridConfig small_config(double lo, double hi, double step) {
  GridConfig cfg;
  cfg.link_mu_min = cfg.link_theta_min = lo;
  cfg.link_mu_max = cfg.link_theta_max = hi;
  cfg.link_mu_step = cfg.link_theta_step = step;
  return cfg;
}

const NormalizingGrid& default_poisson_grid() {
  static const NormalizingGrid grid = build_grid(kPoisson, GridConfig{});
  return grid;
}

// Σ_y exp(log double density) with the normalizer supplied.
double double_poisson_mass(const Normalizer& norm, double mu, double theta) {
  double total = 0.0;
  for (int y = 0; y <= 1000; ++y)
    total += std::exp(log_double_density(kPoisson, norm, y, mu, theta, {}));
  return total;
}

}  // namespace

TEST_CASE("brute-force log Z") {
  CHECK(std::abs(brute_force_log_Z(kPoisson, 3.0, 1.0, {}, 1000)) < 1e-10);
  CHECK(std::abs(brute_force_log_Z(kBinomial, 0.5, 1.0, {4.0}, 1000)) < 1e-12);
  // Frozen from the first run; agrees with truncation 10000.
  const double pinned = -0.03260243303466881;
  CHECK(brute_force_log_Z(kPoisson, 3.0, 0.5, {}, 1000) == doctest::Approx(pinned).epsilon(1e-13));
  CHECK(brute_force_log_Z(kPoisson, 3.0, 0.5, {}, 10000) == doctest::Approx(pinned).epsilon(1e-13));
  CHECK(std::abs(brute_force_log_Z(kGaussian, 0.7, 3.0, {}, 1000)) < 1e-12);
  // Wide masses far from zero: independent lattice sum over mu ± 60 sd.
  CHECK(brute_force_terms(kPoisson, 9.0, -2.0, {}, 1000).terms.value ==
        doctest::Approx(-6.576604028563082e-05).epsilon(1e-7));
  CHECK(std::abs(brute_force_terms(kPoisson, 15.0, 0.0, {}, 1000).terms.value) < 1e-8);
  CHECK_THROWS_AS(brute_force_log_Z(kPoisson, 3.0, -1.0, {}, 1000), DomainError);
  // Means past 2^50 are refused rather than summed with a stride below one ulp.
  CHECK_THROWS_AS(brute_force_terms(kPoisson, 46.0, 30.0, {}, 1000), DomainError);
  CHECK_FALSE(ExactNormalizer(kPoisson).terms(46.0, 30.0, {}).has_value());
  CHECK(ExactNormalizer(kPoisson).terms(34.0, 0.0, {}).has_value());
  CHECK_THROWS_AS(brute_force_terms(kPoisson, 2.3, 774.0, {}, 1000), DomainError);
  CHECK_FALSE(ExactNormalizer(kPoisson).terms(2.3, 774.0, {}).has_value());
  CHECK_FALSE(ExactNormalizer(kBinomial).terms(0.0, -60.0, {4.0}).has_value());
  // Extreme but admissible dispersion still terminates with a finite value.
  CHECK(std::isfinite(brute_force_terms(kPoisson, 2.3, 50.0, {}, 1000).terms.value));
  CHECK(std::isfinite(brute_force_terms(kPoisson, 2.3, -50.0, {}, 1000).terms.value));
}

TEST_CASE("brute-force derivatives match finite differences") {
  const double h = 1e-5;
  for (const auto& [fam, w] : {std::pair{kPoisson, Weight{1.0}}, std::pair{kBinomial, Weight{7.0}}}) {
    for (double eta : {-1.5, 0.2, 1.1}) {
      for (double tau : {-1.0, 0.0, 0.6}) {
        auto f = [&](double e, double t) { return brute_force_terms(fam, e, t, w, 1000).terms.value; };
        const auto t = brute_force_terms(fam, eta, tau, w, 1000).terms;
        CHECK(t.d_mu == doctest::Approx((f(eta + h, tau) - f(eta - h, tau)) / (2 * h)).epsilon(1e-6));
        CHECK(t.d_theta == doctest::Approx((f(eta, tau + h) - f(eta, tau - h)) / (2 * h)).epsilon(1e-6));
        const double h2 = 1e-4;
        CHECK(t.d2_mu == doctest::Approx((f(eta + h2, tau) - 2 * t.value + f(eta - h2, tau)) / (h2 * h2))
                             .epsilon(1e-4));
        CHECK(t.d2_theta ==
              doctest::Approx((f(eta, tau + h2) - 2 * t.value + f(eta, tau - h2)) / (h2 * h2))
                  .epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("grid configuration validation") {
  GridConfig cfg;
  CHECK(cfg.mu_points() == 121);
  CHECK(cfg.theta_points() == 121);
  CHECK(GridConfig::wide().mu_points() == 51);
  cfg.link_mu_step = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = GridConfig{};
  cfg.truncation = 50;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = GridConfig{};
  cfg.weights = {Weight{4.0}, Weight{2.0}};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.weights.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("theta = 1 slice of the default grid") {
  const auto& grid = default_poisson_grid();
  REQUIRE(grid.theta_one_slice_max_abs().has_value());
  CHECK(*grid.theta_one_slice_max_abs() < 1e-8);
  // Midway between μ nodes on the flat slice.
  const double mid = grid.config().mu_node(70) + 0.5 * grid.config().link_mu_step;
  CHECK(std::abs(log_Z(grid, std::exp(mid), 1.0, {})) < 1e-8);

  GridConfig bcfg = small_config(-6, 6, 0.5);
  bcfg.weights = {Weight{4.0}};
  const auto bgrid = build_grid(kBinomial, bcfg);
  CHECK(bgrid.config().weights.size() == 1);
  CHECK(*bgrid.theta_one_slice_max_abs() < 1e-8);
}

TEST_CASE("interpolation is exact at nodes and errors off the grid") {
  const auto& grid = default_poisson_grid();
  const auto& cfg = grid.config();
  for (auto [i, j] : {std::pair<std::size_t, std::size_t>{0, 0}, {37, 81}, {120, 120}, {60, 3}}) {
    CHECK(grid.log_z(cfg.mu_node(i), cfg.theta_node(j), 0) == grid.value(0, i, j));
    CHECK(grid.terms(cfg.mu_node(i), cfg.theta_node(j), {})->value == grid.value(0, i, j));
  }
  try {
    grid.log_z(15.5, 0.0, 0);
    FAIL("expected GridBoundsError");
  } catch (const GridBoundsError& e) {
    CHECK(e.coordinate() == "link_mu");
    CHECK(e.value() == 15.5);
  }
  try {
    grid.log_z(0.0, -16.0, 0);
    FAIL("expected GridBoundsError");
  } catch (const GridBoundsError& e) {
    CHECK(e.coordinate() == "link_theta");
  }
  CHECK_FALSE(grid.terms(0.0, 15.01, {}).has_value());
  CHECK_THROWS_AS(grid.layer_index(Weight{3.0}), GridBoundsError);
}

TEST_CASE("interpolated log Z against brute force") {
  const auto& grid = default_poisson_grid();
  const double mu = std::exp(1.3), theta = std::exp(-0.7);
  const double exact = brute_force_log_Z(kPoisson, mu, theta, {}, 1000);
  CHECK(exact == doctest::Approx(-0.03158865378811382).epsilon(1e-12));
  // Bilinear error at step 0.25 is about 1.8% here.
  CHECK(std::abs(log_Z(grid, mu, theta, {}) - exact) < 2e-2 * std::abs(exact));

  // Errors over random off-grid points shrink as the step shrinks.
  double prev_median = 1e300, prev_max = 1e300;
  for (double step : {0.5, 0.25, 0.125}) {
    const auto g = build_grid(kPoisson, small_config(-6, 6, step));
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> um(-4.0, 4.0), ut(-3.0, 3.0);
    std::vector<double> rel;
    double max_abs = 0.0, max_abs_over = 0.0;
    for (int k = 0; k < 100; ++k) {
      const double eta = um(rng), tau = ut(rng);
      const double ref = brute_force_terms(kPoisson, eta, tau, {}, 1000).terms.value;
      const double err = std::abs(g.log_z(eta, tau, 0) - ref);
      rel.push_back(err / std::abs(ref));
      max_abs = std::max(max_abs, err);
      if (tau <= 0.0) max_abs_over = std::max(max_abs_over, err);
    }
    std::sort(rel.begin(), rel.end());
    CHECK(rel[50] < prev_median);
    CHECK(max_abs < prev_max);
    prev_median = rel[50];
    prev_max = max_abs;
    if (step == 0.25) {
      CHECK(rel[50] < 1e-2);
      CHECK(max_abs_over < 5e-3);
    }
  }
}

TEST_CASE("halving the step shrinks midpoint interpolation error") {
  const auto coarse = build_grid(kPoisson, small_config(-3, 3, 0.5));
  const auto fine = build_grid(kPoisson, small_config(-3, 3, 0.25));
  double err_coarse = 0.0, err_fine = 0.0;
  for (double eta = -2.75; eta < 3.0; eta += 0.5) {
    for (double tau = -2.75; tau < 3.0; tau += 0.5) {
      const double ref = brute_force_terms(kPoisson, eta, tau, {}, 1000).terms.value;
      err_coarse = std::max(err_coarse, std::abs(coarse.log_z(eta, tau, 0) - ref));
      err_fine = std::max(err_fine, std::abs(fine.log_z(eta, tau, 0) - ref));
    }
  }
  CHECK(err_fine == doctest::Approx(fine.log_z(-2.75, -2.75, 0)).epsilon(1.0));  // fine nodes exact
  CHECK(err_fine < 1e-12);
  double err_coarse_off = 0.0, err_fine_off = 0.0;
  for (double eta = -2.6; eta < 2.6; eta += 0.37) {
    for (double tau = -2.6; tau < 2.6; tau += 0.41) {
      const double ref = brute_force_terms(kPoisson, eta, tau, {}, 1000).terms.value;
      err_coarse_off = std::max(err_coarse_off, std::abs(coarse.log_z(eta, tau, 0) - ref));
      err_fine_off = std::max(err_fine_off, std::abs(fine.log_z(eta, tau, 0) - ref));
    }
  }
  CHECK(err_coarse > 0.0);
  CHECK(err_fine_off * 2.0 <= err_coarse_off);
}

TEST_CASE("double density identities") {
  const ExactNormalizer exact_gauss(kGaussian);
  const double ref = 0.5 * std::log(4.0 / (2 * std::numbers::pi)) - 2.0 * 0.09;
  CHECK(log_double_density(kGaussian, exact_gauss, 0.3, 0.0, 4.0, {}) ==
        doctest::Approx(ref).epsilon(1e-14));

  const auto& grid = default_poisson_grid();
  CHECK(log_double_density(kPoisson, grid, 2.0, 3.0, 1.0, {}) ==
        doctest::Approx(log_density(kPoisson, 2.0, 3.0, {})).epsilon(1e-15));

  const ExactNormalizer exact_pois(kPoisson);
  CHECK(double_poisson_mass(exact_pois, 3.0, 0.5) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("double Gaussian collapses to N(mu, 1/theta)") {
  const ExactNormalizer norm(kGaussian);
  double worst = 0.0;
  for (double y = -3.0; y <= 3.0; y += 0.7)
    for (double mu = -2.0; mu <= 2.0; mu += 0.45)
      for (double theta : {0.05, 0.3, 1.0, 2.0, 9.0}) {
        const double var = 1.0 / theta;
        const double ref = -0.5 * std::log(2 * std::numbers::pi * var) - (y - mu) * (y - mu) / (2 * var);
        worst = std::max(worst, std::abs(log_double_density(kGaussian, norm, y, mu, theta, {}) - ref));
      }
  CHECK(worst < 1e-10);
  // Quadrature of the Gaussian normalizer agrees with the closed form.
  CHECK(std::abs(brute_force_log_Z(kGaussian, 1.0, 0.01, {}, 1000)) < 1e-10);
}

TEST_CASE("double binomial sums to one") {
  const ExactNormalizer norm(kBinomial);
  for (double n : {1.0, 4.0, 25.0})
    for (double mu : {0.1, 0.5, 0.8})
      for (double theta : {0.2, 1.0, 3.0}) {
        double total = 0.0;
        for (int k = 0; k <= n; ++k)
          total += std::exp(log_double_density(kBinomial, norm, k / n, mu, theta, {n}));
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
      }
}

TEST_CASE("approximate moments") {
  auto [m, v] = approx_moments(kPoisson, 3.0, 0.5, {});
  CHECK(m == 3.0);
  CHECK(v == doctest::Approx(6.0));
  const ExactNormalizer norm(kPoisson);
  double s1 = 0, s2 = 0;
  for (int y = 0; y <= 1000; ++y) {
    const double p = std::exp(log_double_density(kPoisson, norm, y, 3.0, 0.5, {}));
    s1 += p * y;
    s2 += p * y * y;
  }
  CHECK(std::abs((s2 - s1 * s1) - 6.0) < 0.6);
  auto [m1, v1] = approx_moments(kPoisson, 3.0, 1.0, {});
  CHECK(m1 == 3.0);
  CHECK(v1 == doctest::Approx(3.0));
  auto [mg, vg] = approx_moments(kGaussian, 0.0, 4.0, {});
  CHECK(mg == 0.0);
  CHECK(vg == 0.25);
}

TEST_CASE("grid file round trip") {
  GridConfig cfg = small_config(-4, 4, 0.5);
  cfg.weights = {Weight{2.0}, Weight{5.0}};
  const auto grid = build_grid(kBinomial, cfg);
  std::stringstream a, b;
  write_grid(a, grid);
  write_grid(b, build_grid(kBinomial, cfg));
  CHECK(a.str() == b.str());
  CHECK(a.str().substr(0, 4) == "DXGZ");
  const auto loaded = read_grid(a);
  CHECK(loaded.config() == grid.config());
  CHECK(loaded.family().id == Family::Binomial);
  REQUIRE(loaded.values().size() == grid.values().size());
  for (std::size_t k = 0; k < grid.values().size(); ++k) CHECK(loaded.values()[k] == grid.values()[k]);
  CHECK(loaded.layer_index(Weight{5.0}) == 1);

  std::string bytes = b.str();
  bytes[0] = 'X';
  std::stringstream bad(bytes);
  CHECK_THROWS_AS(read_grid(bad), FormatError);
  bytes = b.str();
  bytes[4] = 9;
  std::stringstream badv(bytes);
  CHECK_THROWS_AS(read_grid(badv), FormatError);
  std::stringstream trunc(b.str().substr(0, 60));
  CHECK_THROWS_AS(read_grid(trunc), FormatError);
}

TEST_CASE("exact double-family draws reproduce the pmf moments") {
  const ExactNormalizer norm(kPoisson);
  Rng rng(99);
  for (auto [mu, theta] : {std::pair{3.0, 0.5}, std::pair{40.0, 2.0}, std::pair{2000.0, 0.3}}) {
    double m1 = 0, m2 = 0;
    const double sd = std::sqrt(mu / theta);
    const int lo = static_cast<int>(std::max(0.0, mu - 20 * sd)), hi = static_cast<int>(mu + 30 * sd + 50);
    for (int y = lo; y <= hi; ++y) {
      const double p = std::exp(log_double_density(kPoisson, norm, y, mu, theta, {}));
      m1 += p * y;
      m2 += p * y * y;
    }
    const double var = m2 - m1 * m1;
    constexpr int kDraws = 100000;
    double s1 = 0, s2 = 0;
    for (int d = 0; d < kDraws; ++d) {
      const double y = draw_double(kPoisson, std::log(mu), std::log(theta), {}, rng);
      s1 += y;
      s2 += y * y;
    }
    const double em = s1 / kDraws, ev = s2 / kDraws - em * em;
    CHECK(std::abs(em - m1) < 5 * std::sqrt(var / kDraws));
    CHECK(std::abs(ev - var) < 0.03 * var);
  }
  const ExactNormalizer bnorm(kBinomial);
  double m1 = 0;
  for (int k = 0; k <= 6; ++k) m1 += k / 6.0 * std::exp(log_double_density(kBinomial, bnorm, k / 6.0, 0.3, 0.4, {6.0}));
  double s1 = 0;
  int off_lattice = 0;
  for (int d = 0; d < 100000; ++d) {
    const double y = draw_double(kBinomial, std::log(0.3 / 0.7), std::log(0.4), {6.0}, rng);
    if (std::abs(y * 6.0 - std::round(y * 6.0)) > 1e-12) ++off_lattice;
    s1 += y;
  }
  CHECK(off_lattice == 0);
  CHECK(std::abs(s1 / 100000 - m1) < 0.003);
  const double g = draw_double(kGaussian, 0.5, std::log(4.0), {}, rng);
  CHECK(std::isfinite(g));
}
