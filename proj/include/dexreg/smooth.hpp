#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace dexreg {

// A covariate on three scales: raw, standardized (mean 0, population
// variance 1) and unit (min-max to [0, 1]).
struct RescaledCovariate {
  std::vector<double> raw;
  std::vector<double> standardized;
  std::vector<double> unit;
  double mean = 0.0;
  double sd = 1.0;  // divisor n
  double min = 0.0;
  double max = 1.0;

  // throws DataError if fewer than two observations or all values equal
  static RescaledCovariate from_raw(std::span<const double> values);
  // Rebuild from stored affine maps, e.g. when loading a fit.
  static RescaledCovariate from_maps(std::span<const double> values, double mean, double sd,
                                     double min, double max);

  std::size_t size() const noexcept { return raw.size(); }
  double to_standardized(double x) const { return (x - mean) / sd; }
  double to_unit(double x) const { return (x - min) / (max - min); }
  double from_unit(double u) const { return min + u * (max - min); }
};

// ½ z² (z′ − z/3) for z ≤ z′, symmetric. Throws DomainError outside [0, 1].
double omega(double z, double zp);

// Gram matrix of omega over unit-scale abscissae.
Eigen::MatrixXd omega_gram(std::span<const double> unit);

// Low-rank factor W = Q_m D_m^{1/2} of a kernel Gram matrix V.
struct SmoothBasis {
  Eigen::MatrixXd w_matrix;     // n × m
  Eigen::MatrixXd eigenvectors; // n × m, Q_m
  Eigen::VectorXd eigenvalues;  // m, descending
  double total_trace = 0.0;
  double energy = 0.0;

  std::size_t rank() const noexcept { return static_cast<std::size_t>(eigenvalues.size()); }
  std::size_t rows() const noexcept { return static_cast<std::size_t>(w_matrix.rows()); }
};

// Eigenvalues below 1e-12·trace are dropped, then m is the smallest count
// whose cumulative share of the trace reaches the threshold.
SmoothBasis eigen_truncate(const Eigen::MatrixXd& gram, double energy_threshold);

SmoothBasis build_basis(const RescaledCovariate& x, double energy_threshold = 0.98);

// Tensor-product basis for the pair (j, k) with kernel Ω(x_j)·Ω(x_k).
struct InteractionBasis {
  std::size_t j = 0;
  std::size_t k = 0;
  SmoothBasis basis;
};

InteractionBasis build_interaction_basis(const RescaledCovariate& xj, const RescaledCovariate& xk,
                                         double energy_threshold = 0.98, std::size_t j = 0,
                                         std::size_t k = 1);

// Conditional mean Ω(z_new, x_unit) Q_m D_m^{-1/2} α of the smooth at raw-scale
// points. Points mapping outside [0, 1] are clamped with a warning.
std::vector<double> predict_at(const SmoothBasis& basis, const RescaledCovariate& x,
                               const Eigen::VectorXd& alpha, std::span<const double> z_new);

// Same for an interaction smooth at raw-scale points (zj_new[i], zk_new[i]).
std::vector<double> predict_interaction_at(const InteractionBasis& basis, const RescaledCovariate& xj,
                                           const RescaledCovariate& xk, const Eigen::VectorXd& alpha,
                                           std::span<const double> zj_new, std::span<const double> zk_new);

}  // namespace dexreg
