#include "dexreg/smooth.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <spdlog/spdlog.h>

#include "dexreg/error.hpp"

namespace dexreg {

namespace {

constexpr double kZeroEigenRel = 1e-12;

void check_unit(double z) {
  if (!(z >= 0.0 && z <= 1.0)) {
    std::ostringstream os;
    os << "omega argument " << z << " outside [0, 1]";
    throw DomainError(os.str());
  }
}

double omega_unchecked(double z, double zp) {
  if (z > zp) std::swap(z, zp);
  return 0.5 * z * z * (zp - z / 3.0);
}

}  // namespace

RescaledCovariate RescaledCovariate::from_raw(std::span<const double> values) {
  if (values.size() < 2) throw DataError("a covariate needs at least two observations");
  for (double v : values)
    if (!std::isfinite(v)) throw DataError("covariate values must be finite");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi) throw DataError("covariate is constant; no smooth can be built");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size()));
  return from_maps(values, mean, sd, *lo, *hi);
}

RescaledCovariate RescaledCovariate::from_maps(std::span<const double> values, double mean,
                                               double sd, double min, double max) {
  if (!(sd > 0.0) || !(max > min)) throw DataError("degenerate covariate scaling");
  RescaledCovariate x;
  x.mean = mean;
  x.sd = sd;
  x.min = min;
  x.max = max;
  x.raw.assign(values.begin(), values.end());
  x.standardized.reserve(values.size());
  x.unit.reserve(values.size());
  for (double v : values) {
    x.standardized.push_back(x.to_standardized(v));
    x.unit.push_back(x.to_unit(v));
  }
  return x;
}

double omega(double z, double zp) {
  check_unit(z);
  check_unit(zp);
  return omega_unchecked(z, zp);
}

Eigen::MatrixXd omega_gram(std::span<const double> unit) {
  for (double z : unit) check_unit(z);
  const auto n = static_cast<Eigen::Index>(unit.size());
  Eigen::MatrixXd v(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k <= i; ++k) v(i, k) = v(k, i) = omega_unchecked(unit[i], unit[k]);
  return v;
}

SmoothBasis eigen_truncate(const Eigen::MatrixXd& gram, double energy_threshold) {
  if (!(energy_threshold > 0.0 && energy_threshold <= 1.0))
    throw ConfigError("energy threshold must lie in (0, 1]");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const Eigen::Index n = gram.rows();
  const double trace = gram.trace();
  if (!(trace > 0.0)) throw DataError("kernel matrix has zero trace");
  // Eigen returns ascending order.
  Eigen::Index keep = 0;
  double cumulative = 0.0;
  for (Eigen::Index r = n - 1; r >= 0; --r) {
    const double lambda = eig.eigenvalues()(r);
    if (lambda < kZeroEigenRel * trace) break;
    ++keep;
    cumulative += lambda;
    if (cumulative / trace >= energy_threshold) break;
  }
  if (keep == 0) throw DataError("kernel matrix has no positive eigenvalues");
  SmoothBasis b;
  b.total_trace = trace;
  b.eigenvalues.resize(keep);
  b.eigenvectors.resize(n, keep);
  for (Eigen::Index c = 0; c < keep; ++c) {
    b.eigenvalues(c) = eig.eigenvalues()(n - 1 - c);
    Eigen::VectorXd q = eig.eigenvectors().col(n - 1 - c);
    // Fix the sign so the largest-magnitude entry is positive.
    Eigen::Index arg;
    q.cwiseAbs().maxCoeff(&arg);
    if (q(arg) < 0.0) q = -q;
    b.eigenvectors.col(c) = q;
  }
  b.w_matrix = b.eigenvectors * b.eigenvalues.cwiseSqrt().asDiagonal();
  b.energy = cumulative / trace;
  return b;
}

SmoothBasis build_basis(const RescaledCovariate& x, double energy_threshold) {
  return eigen_truncate(omega_gram(x.unit), energy_threshold);
}

InteractionBasis build_interaction_basis(const RescaledCovariate& xj, const RescaledCovariate& xk,
                                         double energy_threshold, std::size_t j, std::size_t k) {
  if (xj.size() != xk.size()) throw DataError("interaction covariates differ in length");
  const Eigen::MatrixXd gram = omega_gram(xj.unit).cwiseProduct(omega_gram(xk.unit));
  return {j, k, eigen_truncate(gram, energy_threshold)};
}

std::vector<double> predict_at(const SmoothBasis& basis, const RescaledCovariate& x,
                               const Eigen::VectorXd& alpha, std::span<const double> z_new) {
  if (static_cast<std::size_t>(alpha.size()) != basis.rank())
    throw DomainError("coefficient length does not match basis rank");
  if (basis.rows() != x.size()) throw DomainError("basis and covariate differ in length");
  std::vector<double> out;
  if (z_new.empty()) return out;
  const Eigen::VectorXd coef =
      basis.eigenvectors * (alpha.array() / basis.eigenvalues.array().sqrt()).matrix();
  std::size_t clamped = 0;
  out.reserve(z_new.size());
  for (double z : z_new) {
    double u = x.to_unit(z);
    if (u < 0.0 || u > 1.0) {
      u = std::clamp(u, 0.0, 1.0);
      ++clamped;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += omega_unchecked(u, x.unit[i]) * coef(i);
    out.push_back(acc);
  }
  if (clamped > 0)
    spdlog::warn("{} prediction point(s) outside the observed covariate range were clamped",
                 clamped);
  return out;
}

std::vector<double> predict_interaction_at(const InteractionBasis& ib, const RescaledCovariate& xj,
                                           const RescaledCovariate& xk, const Eigen::VectorXd& alpha,
                                           std::span<const double> zj_new, std::span<const double> zk_new) {
  const SmoothBasis& basis = ib.basis;
  if (static_cast<std::size_t>(alpha.size()) != basis.rank())
    throw DomainError("coefficient length does not match basis rank");
  if (basis.rows() != xj.size() || basis.rows() != xk.size())
    throw DomainError("basis and covariates differ in length");
  if (zj_new.size() != zk_new.size()) throw DomainError("prediction coordinates differ in length");
  std::vector<double> out;
  if (zj_new.empty()) return out;
  const Eigen::VectorXd coef =
      basis.eigenvectors * (alpha.array() / basis.eigenvalues.array().sqrt()).matrix();
  std::size_t clamped = 0;
  auto unit = [&](const RescaledCovariate& x, double z) {
    const double u = x.to_unit(z);
    if (u < 0.0 || u > 1.0) ++clamped;
    return std::clamp(u, 0.0, 1.0);
  };
  out.reserve(zj_new.size());
  for (std::size_t q = 0; q < zj_new.size(); ++q) {
    const double uj = unit(xj, zj_new[q]), uk = unit(xk, zk_new[q]);
    double acc = 0.0;
    for (std::size_t i = 0; i < xj.size(); ++i)
      acc += omega_unchecked(uj, xj.unit[i]) * omega_unchecked(uk, xk.unit[i]) * coef(static_cast<Eigen::Index>(i));
    out.push_back(acc);
  }
  if (clamped > 0)
    spdlog::warn("{} prediction coordinate(s) outside the observed covariate range were clamped", clamped);
  return out;
}

}  // namespace dexreg
