#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace dexreg {

enum class Family : std::uint8_t { Poisson = 0, Binomial = 1, Gaussian = 2 };

std::string_view family_name(Family f) noexcept;
Family parse_family(std::string_view name);  // throws ConfigError

// The A in the scale φ/A. Binomial responses are stored as proportions k/n
// with A = n; Poisson and Gaussian observations carry A = 1.
struct Weight {
  double a = 1.0;
  friend bool operator==(Weight, Weight) = default;
};

// One-parameter exponential family
//   p(y; μ, φ/A) = exp{ [yψ − b(ψ)] / (φ/A) + c(y, φ/A) },   μ = b′(ψ).
// Every family here uses its canonical link, so the natural parameter ψ is
// also the link-scale mean g(μ).
struct ExponentialFamily {
  Family id = Family::Poisson;
  double phi = 1.0;

  double cumulant(double psi) const;         // b(ψ)
  double cumulant_d1(double psi) const;      // b′(ψ)
  double cumulant_d2(double psi) const;      // b″(ψ)
  double canonical_param(double mu) const;   // ψ(μ)
  double mean_param(double psi) const;       // b′(ψ)
  double log_base_measure(double y, Weight w) const;  // c(y, φ/A)

  // y·ψ(y) − b(ψ(y)) with the boundary limits (0·log 0 = 0).
  double saturated_kernel(double y) const;

  void check_mean(double mu) const;
  void check_natural(double psi) const;
  void check_support(double y, Weight w) const;
  void check_weight(Weight w) const;

  // True for Poisson and binomial.
  bool discrete() const noexcept { return id != Family::Gaussian; }
};

// log p(y; μ, φ/A).
double log_density(const ExponentialFamily& fam, double y, double mu, Weight w);
// Same density parametrized by ψ; skips the μ → ψ map.
double log_density_natural(const ExponentialFamily& fam, double y, double psi, Weight w);
// log p(y; y, φ/A), the saturated density. Poisson y = 0 and binomial
// y ∈ {0, 1} use their limits, which equal 0 on the kernel part.
double log_saturated_density(const ExponentialFamily& fam, double y, Weight w);

double canonical_param(const ExponentialFamily& fam, double mu);
double mean_param(const ExponentialFamily& fam, double psi);

// (φ/A)·b″(ψ(μ)).
double variance_function(const ExponentialFamily& fam, double mu, Weight w);

}  // namespace dexreg
