#include "dexreg/expfam.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "dexreg/error.hpp"

namespace dexreg {

namespace {

constexpr double kIntegerTol = 1e-9;

[[noreturn]] void domain_fail(const char* what, double value) {
  std::ostringstream os;
  os << what << " (got " << value << ")";
  throw DomainError(os.str());
}

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::string_view family_name(Family f) noexcept {
  switch (f) {
    case Family::Poisson: return "poisson";
    case Family::Binomial: return "binomial";
    case Family::Gaussian: return "gaussian";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  if (name == "poisson") return Family::Poisson;
  if (name == "binomial") return Family::Binomial;
  if (name == "gaussian") return Family::Gaussian;
  throw ConfigError("unknown family '" + std::string(name) + "'");
}

double ExponentialFamily::cumulant(double psi) const {
  switch (id) {
    case Family::Poisson: return std::exp(psi);
    case Family::Binomial: return softplus(psi);
    case Family::Gaussian: return 0.5 * psi * psi;
  }
  return 0.0;
}

double ExponentialFamily::cumulant_d1(double psi) const {
  switch (id) {
    case Family::Poisson: return std::exp(psi);
    case Family::Binomial: return logistic(psi);
    case Family::Gaussian: return psi;
  }
  return 0.0;
}

double ExponentialFamily::cumulant_d2(double psi) const {
  switch (id) {
    case Family::Poisson: return std::exp(psi);
    case Family::Binomial: {
      const double m = logistic(psi);
      return m * logistic(-psi);
    }
    case Family::Gaussian: return 1.0;
  }
  return 0.0;
}

double ExponentialFamily::canonical_param(double mu) const {
  check_mean(mu);
  switch (id) {
    case Family::Poisson: return std::log(mu);
    case Family::Binomial: return std::log(mu) - std::log1p(-mu);
    case Family::Gaussian: return mu;
  }
  return 0.0;
}

double ExponentialFamily::mean_param(double psi) const {
  check_natural(psi);
  return cumulant_d1(psi);
}

double ExponentialFamily::log_base_measure(double y, Weight w) const {
  switch (id) {
    case Family::Poisson: return -std::lgamma(y + 1.0);
    case Family::Binomial: {
      const double n = w.a;
      const double k = std::round(y * n);
      return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    }
    case Family::Gaussian: {
      const double scale = phi / w.a;
      return -0.5 * y * y / scale - 0.5 * std::log(2.0 * std::numbers::pi * scale);
    }
  }
  return 0.0;
}

double ExponentialFamily::saturated_kernel(double y) const {
  switch (id) {
    case Family::Poisson: return xlogx(y) - y;
    case Family::Binomial: return xlogx(y) + xlogx(1.0 - y);
    case Family::Gaussian: return 0.5 * y * y;
  }
  return 0.0;
}

void ExponentialFamily::check_mean(double mu) const {
  if (!std::isfinite(mu)) domain_fail("mean must be finite", mu);
  switch (id) {
    case Family::Poisson:
      if (!(mu > 0.0)) domain_fail("Poisson mean must be positive", mu);
      break;
    case Family::Binomial:
      if (!(mu > 0.0 && mu < 1.0)) domain_fail("binomial mean must lie in (0, 1)", mu);
      break;
    case Family::Gaussian: break;
  }
}

void ExponentialFamily::check_natural(double psi) const {
  if (!std::isfinite(psi)) domain_fail("natural parameter must be finite", psi);
}

void ExponentialFamily::check_weight(Weight w) const {
  if (!(w.a > 0.0) || !std::isfinite(w.a)) domain_fail("weight must be positive", w.a);
  if (id == Family::Binomial) {
    if (w.a < 1.0 || std::abs(w.a - std::round(w.a)) > kIntegerTol)
      domain_fail("binomial weight must be a positive integer number of trials", w.a);
  } else if (id == Family::Poisson && w.a != 1.0) {
    domain_fail("Poisson weight must be 1", w.a);
  }
  if (discrete() && phi != 1.0) domain_fail("discrete families require phi = 1", phi);
}

void ExponentialFamily::check_support(double y, Weight w) const {
  if (!std::isfinite(y)) domain_fail("response must be finite", y);
  switch (id) {
    case Family::Poisson:
      if (y < 0.0 || std::abs(y - std::round(y)) > kIntegerTol)
        domain_fail("Poisson response must be a non-negative integer", y);
      break;
    case Family::Binomial: {
      const double k = y * w.a;
      if (y < 0.0 || y > 1.0 || std::abs(k - std::round(k)) > kIntegerTol * w.a)
        domain_fail("binomial response must be a proportion k/n", y);
      break;
    }
    case Family::Gaussian: break;
  }
}

double log_density_natural(const ExponentialFamily& fam, double y, double psi, Weight w) {
  fam.check_weight(w);
  fam.check_support(y, w);
  fam.check_natural(psi);
  const double scale = fam.phi / w.a;
  return (y * psi - fam.cumulant(psi)) / scale + fam.log_base_measure(y, w);
}

double log_density(const ExponentialFamily& fam, double y, double mu, Weight w) {
  return log_density_natural(fam, y, fam.canonical_param(mu), w);
}

double log_saturated_density(const ExponentialFamily& fam, double y, Weight w) {
  fam.check_weight(w);
  fam.check_support(y, w);
  return fam.saturated_kernel(y) * w.a / fam.phi + fam.log_base_measure(y, w);
}

double canonical_param(const ExponentialFamily& fam, double mu) {
  return fam.canonical_param(mu);
}

double mean_param(const ExponentialFamily& fam, double psi) { return fam.mean_param(psi); }

double variance_function(const ExponentialFamily& fam, double mu, Weight w) {
  fam.check_weight(w);
  return fam.phi / w.a * fam.cumulant_d2(fam.canonical_param(mu));
}

}  // namespace dexreg
