#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dexreg/expfam.hpp"
#include "dexreg/random.hpp"

namespace dexreg {

// Tabulation layout for log Z. Both axes are on the link scale: g(μ) for the
// mean (log, logit or identity) and h(θ) = log θ for the dispersion.
struct GridConfig {
  double link_mu_min = -15.0;
  double link_mu_max = 15.0;
  double link_mu_step = 0.25;
  double link_theta_min = -15.0;
  double link_theta_max = 15.0;
  double link_theta_step = 0.25;
  std::uint32_t truncation = 1000;
  std::vector<Weight> weights{Weight{1.0}};

  // [-50, 50] in steps of 2 on both link axes (binomial; a Poisson grid's
  // mean axis must stop at 50 log 2).
  static GridConfig wide();

  void validate() const;  // throws ConfigError
  std::size_t mu_points() const;
  std::size_t theta_points() const;
  double mu_node(std::size_t i) const { return link_mu_min + static_cast<double>(i) * link_mu_step; }
  double theta_node(std::size_t j) const {
    return link_theta_min + static_cast<double>(j) * link_theta_step;
  }
  double mu_upper() const { return mu_node(mu_points() - 1); }
  double theta_upper() const { return theta_node(theta_points() - 1); }

  friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

// log Z together with its partial derivatives in (g(μ), log θ).
struct LogZTerms {
  double value = 0.0;
  double d_mu = 0.0;
  double d_theta = 0.0;
  double d2_mu = 0.0;
  double d2_theta = 0.0;
};

// Source of the double-family normalizing constant. Implementations are
// immutable after construction and safe to share across chains.
class Normalizer {
 public:
  virtual ~Normalizer() = default;
  virtual const ExponentialFamily& family() const = 0;
  // std::nullopt when (link_mu, link_theta, w) is outside the supported region.
  virtual std::optional<LogZTerms> terms(double link_mu, double link_theta, Weight w) const = 0;
};

struct BruteForceResult {
  LogZTerms terms;
  bool tail_converged = true;  // false if the last summed term exceeded 1e-12 of the total
};

// −log Σ_y θ^{1/2} p(y;μ)^θ p(y;y)^{1−θ} and its derivatives, accumulated in
// log space. Poisson sums y = 0..truncation, stopping early once past the mode
// the terms fall below e^{-50} of the running total; binomial sums k = 0..n
// exactly; Gaussian integrates numerically. Throws DomainError for |log θ| > 50
// and for Poisson means above 2^50, where counts are not exact doubles.
BruteForceResult brute_force_terms(const ExponentialFamily& fam, double link_mu,
                                   double link_theta, Weight w, std::uint32_t truncation);

double brute_force_log_Z(const ExponentialFamily& fam, double mu, double theta, Weight w,
                         std::uint32_t truncation);

// Precomputed log Z over the (weight, g(μ), log θ) lattice with bilinear
// interpolation in the two link coordinates.
class NormalizingGrid final : public Normalizer {
 public:
  NormalizingGrid(ExponentialFamily fam, GridConfig cfg, std::vector<double> values,
                  std::size_t unconverged_nodes = 0);

  const ExponentialFamily& family() const override { return family_; }
  const GridConfig& config() const noexcept { return config_; }
  std::span<const double> values() const noexcept { return values_; }
  double value(std::size_t layer, std::size_t i, std::size_t j) const {
    return values_[(layer * mu_points_ + i) * theta_points_ + j];
  }

  // Index of the tabulated layer for w; throws GridBoundsError("weight").
  std::size_t layer_index(Weight w) const;

  // Interpolated log Z; throws GridBoundsError naming the escaping coordinate.
  double log_z(double link_mu, double link_theta, std::size_t layer) const;

  std::optional<LogZTerms> terms(double link_mu, double link_theta, Weight w) const override;

  // max |log Z| over nodes with log θ = 0, or nullopt if θ = 1 is not a node.
  std::optional<double> theta_one_slice_max_abs() const;

  // Nodes whose Poisson sum had not converged at the truncation point.
  std::size_t unconverged_nodes() const noexcept { return unconverged_; }

 private:
  struct Cell {
    std::size_t i, j;
    double fx, fy;
  };
  std::optional<Cell> locate(double link_mu, double link_theta) const;

  ExponentialFamily family_;
  GridConfig config_;
  std::vector<double> values_;
  std::size_t mu_points_;
  std::size_t theta_points_;
  std::size_t unconverged_;
};

NormalizingGrid build_grid(const ExponentialFamily& fam, const GridConfig& cfg);

// Interpolated log Z at mean-scale μ and θ.
double log_Z(const NormalizingGrid& grid, double mu, double theta, Weight w);

// Brute-force normalizer evaluated on demand, with analytic derivatives.
// Gaussian uses the closed form Z = 1. Unavailable for |log θ| > 50 and, for
// the Poisson, above g(μ) = 50 log 2.
class ExactNormalizer final : public Normalizer {
 public:
  explicit ExactNormalizer(ExponentialFamily fam, std::uint32_t truncation = 1000)
      : family_(fam), truncation_(truncation) {}
  const ExponentialFamily& family() const override { return family_; }
  std::optional<LogZTerms> terms(double link_mu, double link_theta, Weight w) const override;

 private:
  ExponentialFamily family_;
  std::uint32_t truncation_;
};

// log Z + ½log θ + θ·log p(y;μ) + (1−θ)·log p(y;y).
double log_double_density(const ExponentialFamily& fam, const Normalizer& norm, double y,
                          double mu, double theta, Weight w);

// (μ, (φ/(Aθ))·b″(ψ(μ))).
std::pair<double, double> approx_moments(const ExponentialFamily& fam, double mu, double theta,
                                         Weight w);

// Exact draw from the double family: inverse cdf over the support for the
// discrete families (binomial returns the proportion k/n), N(μ, φ/(Aθ)) for
// the Gaussian.
double draw_double(const ExponentialFamily& fam, double link_mu, double link_theta, Weight w,
                   Rng& rng, std::uint32_t truncation = 1000);

// Grid file: "DXGZ", u32 version, u8 family, GridConfig fields (f64 x6, u32
// truncation), u32 weight count, f64 weights, f64 values in (weight, μ, θ)
// row-major order. All little-endian.
inline constexpr std::uint32_t kGridFormatVersion = 1;
void write_grid(std::ostream& out, const NormalizingGrid& grid);
NormalizingGrid read_grid(std::istream& in);
void save_grid(const std::filesystem::path& path, const NormalizingGrid& grid);
NormalizingGrid load_grid(const std::filesystem::path& path);

}  // namespace dexreg
