#include "dexreg/dexp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <type_traits>

#include <spdlog/spdlog.h>

#include "dexreg/error.hpp"
#include "dexreg/random.hpp"

namespace dexreg {

namespace {

constexpr double kNodeSnap = 1e-9;
constexpr double kEarlyStopLog = 50.0;
constexpr double kTailRelTol = 1e-12;
constexpr double kStrideMinSd = 64.0;
// Counts stay exactly representable (and the summation stride nonzero) below 2^50.
constexpr double kPoissonMaxLinkMu = 50.0 * std::numbers::ln2;
// |log θ| beyond this overflows θ·log p in the summands.
constexpr double kMaxAbsLinkTheta = 50.0;

std::size_t axis_points(double lo, double hi, double step) {
  return static_cast<std::size_t>(std::floor((hi - lo) / step + kNodeSnap)) + 1;
}

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

// Streaming log-sum-exp with first and second moments of two per-term scores.
class WeightedLogSum {
 public:
  void add(double s, double a, double a2, double b, double b2) {
    if (!std::isfinite(s)) {
      if (s == -std::numeric_limits<double>::infinity()) return;
      throw NumericalError("normalizing-constant summand overflowed");
    }
    if (s > max_) {
      const double scale = std::exp(max_ - s);
      for (double* v : {&w0_, &wa_, &waa_, &wa2_, &wb_, &wbb_, &wb2_}) *v *= scale;
      max_ = s;
    }
    const double e = std::exp(s - max_);
    w0_ += e;
    wa_ += e * a;
    waa_ += e * a * a;
    wa2_ += e * a2;
    wb_ += e * b;
    wbb_ += e * b * b;
    wb2_ += e * b2;
  }

  double log_total() const { return max_ + std::log(w0_); }

  LogZTerms log_z_terms() const {
    LogZTerms t;
    t.value = -log_total();
    const double ea = wa_ / w0_, eb = wb_ / w0_;
    t.d_mu = -ea;
    t.d_theta = -eb;
    t.d2_mu = -(wa2_ / w0_ + waa_ / w0_ - ea * ea);
    t.d2_theta = -(wb2_ / w0_ + wbb_ / w0_ - eb * eb);
    return t;
  }

 private:
  double max_ = -std::numeric_limits<double>::infinity();
  double w0_ = 0.0, wa_ = 0.0, waa_ = 0.0, wa2_ = 0.0, wb_ = 0.0, wbb_ = 0.0, wb2_ = 0.0;
};

// lgamma(y + 1) − [y log y − y + ½log(2πy)].
double stirling_remainder(double y) {
  const double r = 1.0 / y, r2 = r * r;
  return r * (1.0 / 12.0 - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 / 1680.0)));
}

double poisson_log_saturated_direct(double y) {
  if (y < 10.0) return xlogx(y) - y - std::lgamma(y + 1.0);
  return -0.5 * std::log(2.0 * std::numbers::pi * y) - stirling_remainder(y);
}

// log p(y; y) for the Poisson, free of the cancellation in y log y − lgamma(y + 1).
// Small integer arguments come from a table.
double poisson_log_saturated(double y) {
  constexpr int kTable = 4096;
  static const std::vector<double> table = [] {
    std::vector<double> t(kTable);
    for (int k = 0; k < kTable; ++k) t[k] = poisson_log_saturated_direct(k);
    return t;
  }();
  if (y < kTable && y == std::floor(y)) return table[static_cast<std::size_t>(y)];
  return poisson_log_saturated_direct(y);
}

// y log(y/μ) − y + μ ≥ 0, the Poisson unit deviance halved.
double poisson_half_deviance(double y, double mu) {
  if (y == 0.0) return mu;
  const double r = (y - mu) / mu;
  if (r > -0.5 && r < 1.0) return mu * ((1.0 + r) * std::log1p(r) - r);
  return y * std::log(y / mu) - y + mu;
}

double poisson_summand(double y, double tau, double theta, double mu, WeightedLogSum& acc,
                       double log_step = 0.0) {
  const double sat = poisson_log_saturated(y);
  const double dev = -poisson_half_deviance(y, mu);  // log p(y; μ) − log p(y; y)
  const double s = 0.5 * tau + theta * dev + sat;
  acc.add(s + log_step, theta * (y - mu), -theta * mu, 0.5 + theta * dev, theta * dev);
  return s;
}

// Masses well clear of zero are summed outward from the mean. Once the width σ
// is large the lattice sum of the smooth bell equals its trapezoid rule at any
// step h ≤ σ/8 to far below double precision, so the stride grows with σ.
BruteForceResult poisson_interior(double eta, double tau, double sd) {
  const double theta = std::exp(tau);
  const double mu = std::exp(eta);
  const double h = sd >= kStrideMinSd ? std::floor(sd / 8.0) : 1.0;
  const double log_h = std::log(h);
  const double center = std::round(mu);
  WeightedLogSum acc;
  poisson_summand(center, tau, theta, mu, acc, log_h);
  for (int dir : {1, -1}) {
    double prev = std::numeric_limits<double>::infinity();
    for (double y = center + dir * h; y >= 0.0; y += dir * h) {
      const double s = poisson_summand(y, tau, theta, mu, acc, log_h);
      if (s < prev && s + log_h < acc.log_total() - kEarlyStopLog) break;
      prev = s;
    }
  }
  return {acc.log_z_terms(), true};
}

BruteForceResult poisson_terms(double eta, double tau, std::uint32_t truncation) {
  if (eta > kPoissonMaxLinkMu) throw DomainError("Poisson mean beyond 2^50 cannot be summed");
  const double theta = std::exp(tau);
  const double mu = std::exp(eta);
  const double sd = std::sqrt(mu / theta);
  if (mu >= 10.0 * sd + 10.0) return poisson_interior(eta, tau, sd);
  WeightedLogSum acc;
  BruteForceResult out;
  double prev = -std::numeric_limits<double>::infinity();
  double last = prev;
  bool stopped = false;
  for (std::uint32_t k = 0; k <= truncation; ++k) {
    const double y = k;
    const double s = poisson_summand(y, tau, theta, mu, acc);
    last = s;
    if (y > mu && s < prev && s < acc.log_total() - kEarlyStopLog) {
      stopped = true;
      break;
    }
    prev = s;
  }
  out.terms = acc.log_z_terms();
  if (!stopped && last - acc.log_total() > std::log(kTailRelTol)) out.tail_converged = false;
  return out;
}

BruteForceResult binomial_terms(double eta, double tau, double trials) {
  const double theta = std::exp(tau);
  const auto n = static_cast<std::uint32_t>(std::lround(trials));
  const double softplus = eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
  const double mu = eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
  const double var = mu * (1.0 - mu);
  const double lgn = std::lgamma(trials + 1.0);
  WeightedLogSum acc;
  for (std::uint32_t k = 0; k <= n; ++k) {
    const double kk = k;
    const double y = kk / trials;
    const double logc = lgn - std::lgamma(kk + 1.0) - std::lgamma(trials - kk + 1.0);
    const double base = kk * eta - trials * softplus + logc;
    const double sat = trials * (xlogx(y) + xlogx(1.0 - y)) + logc;
    const double dev = base - sat;
    const double s = 0.5 * tau + theta * base + (1.0 - theta) * sat;
    acc.add(s, theta * (kk - trials * mu), -theta * trials * var, 0.5 + theta * dev, theta * dev);
  }
  return {acc.log_z_terms(), true};
}

// Composite Simpson over μ ± 40 sd of the double-Gaussian density.
BruteForceResult gaussian_terms(double phi, double eta, double tau, Weight w) {
  const double theta = std::exp(tau);
  const double scale = phi / w.a;
  const double sd = std::sqrt(scale / theta);
  constexpr int kIntervals = 4000;
  const double lo = eta - 40.0 * sd;
  const double h = 80.0 * sd / kIntervals;
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * scale);
  double sum = 0.0;
  for (int k = 0; k <= kIntervals; ++k) {
    const double y = lo + k * h;
    const double r = y - eta;
    const double s = 0.5 * tau - theta * r * r / (2.0 * scale) + log_norm;
    const double coef = (k == 0 || k == kIntervals) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    sum += coef * std::exp(s);
  }
  BruteForceResult out;
  out.terms.value = -std::log(sum * h / 3.0);
  return out;
}

}  // namespace

GridConfig GridConfig::wide() {
  GridConfig cfg;
  cfg.link_mu_min = cfg.link_theta_min = -50.0;
  cfg.link_mu_max = cfg.link_theta_max = 50.0;
  cfg.link_mu_step = cfg.link_theta_step = 2.0;
  return cfg;
}

void GridConfig::validate() const {
  auto axis = [](const char* name, double lo, double hi, double step) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
      throw ConfigError(std::string(name) + ": min must be below max");
    if (!(step > 0.0) || !std::isfinite(step))
      throw ConfigError(std::string(name) + ": step must be positive");
  };
  axis("link_mu", link_mu_min, link_mu_max, link_mu_step);
  axis("link_theta", link_theta_min, link_theta_max, link_theta_step);
  if (link_theta_min < -kMaxAbsLinkTheta || link_theta_max > kMaxAbsLinkTheta)
    throw ConfigError("link_theta must lie within [-50, 50]");
  if (truncation < 100) throw ConfigError("truncation must be at least 100");
  if (weights.empty()) throw ConfigError("grid needs at least one weight");
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (!(weights[k].a > 0.0)) throw ConfigError("grid weights must be positive");
    if (k > 0 && !(weights[k - 1].a < weights[k].a))
      throw ConfigError("grid weights must be sorted and distinct");
  }
}

std::size_t GridConfig::mu_points() const {
  return axis_points(link_mu_min, link_mu_max, link_mu_step);
}

std::size_t GridConfig::theta_points() const {
  return axis_points(link_theta_min, link_theta_max, link_theta_step);
}

BruteForceResult brute_force_terms(const ExponentialFamily& fam, double link_mu,
                                   double link_theta, Weight w, std::uint32_t truncation) {
  fam.check_weight(w);
  fam.check_natural(link_mu);
  if (!(std::abs(link_theta) <= kMaxAbsLinkTheta)) throw DomainError("dispersion link must lie within [-50, 50]");
  switch (fam.id) {
    case Family::Poisson: return poisson_terms(link_mu, link_theta, truncation);
    case Family::Binomial: return binomial_terms(link_mu, link_theta, w.a);
    case Family::Gaussian: return gaussian_terms(fam.phi, link_mu, link_theta, w);
  }
  return {};
}

double brute_force_log_Z(const ExponentialFamily& fam, double mu, double theta, Weight w,
                         std::uint32_t truncation) {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw DomainError("theta must be positive");
  const auto r = brute_force_terms(fam, fam.canonical_param(mu), std::log(theta), w, truncation);
  if (!r.tail_converged)
    spdlog::warn("Poisson normalizer at mu={} theta={} not converged at truncation {}", mu,
                 theta, truncation);
  return r.terms.value;
}

NormalizingGrid::NormalizingGrid(ExponentialFamily fam, GridConfig cfg, std::vector<double> values,
                                 std::size_t unconverged_nodes)
    : family_(fam),
      config_(std::move(cfg)),
      values_(std::move(values)),
      mu_points_(config_.mu_points()),
      theta_points_(config_.theta_points()),
      unconverged_(unconverged_nodes) {
  config_.validate();
  if (values_.size() != config_.weights.size() * mu_points_ * theta_points_)
    throw FormatError("grid value count does not match its configuration");
  for (double v : values_)
    if (!std::isfinite(v)) throw FormatError("grid contains a non-finite value");
}

std::size_t NormalizingGrid::layer_index(Weight w) const {
  const auto& ws = config_.weights;
  auto it = std::lower_bound(ws.begin(), ws.end(), w.a * (1.0 - 1e-12),
                             [](Weight a, double b) { return a.a < b; });
  if (it == ws.end() || std::abs(it->a - w.a) > 1e-9 * std::max(1.0, w.a)) {
    std::ostringstream os;
    os << "weight " << w.a << " is not tabulated in the grid";
    throw GridBoundsError("weight", w.a, os.str());
  }
  return static_cast<std::size_t>(it - ws.begin());
}

std::optional<NormalizingGrid::Cell> NormalizingGrid::locate(double link_mu,
                                                             double link_theta) const {
  auto axis = [](double x, double lo, double step,
                 std::size_t n) -> std::optional<std::pair<std::size_t, double>> {
    if (!std::isfinite(x)) return std::nullopt;
    double pos = (x - lo) / step;
    const double nearest = std::round(pos);
    if (std::abs(pos - nearest) < kNodeSnap) pos = nearest;
    if (pos < 0.0 || pos > static_cast<double>(n - 1)) return std::nullopt;
    auto idx = static_cast<std::size_t>(pos);
    if (idx == n - 1) idx = n - 2;
    return std::pair{idx, pos - static_cast<double>(idx)};
  };
  auto mx = axis(link_mu, config_.link_mu_min, config_.link_mu_step, mu_points_);
  auto ty = axis(link_theta, config_.link_theta_min, config_.link_theta_step, theta_points_);
  if (!mx || !ty) return std::nullopt;
  return Cell{mx->first, ty->first, mx->second, ty->second};
}

double NormalizingGrid::log_z(double link_mu, double link_theta, std::size_t layer) const {
  const auto cell = locate(link_mu, link_theta);
  if (!cell) {
    const bool mu_bad = !(link_mu >= config_.link_mu_min && link_mu <= config_.mu_upper());
    std::ostringstream os;
    if (mu_bad)
      os << "g(mu) = " << link_mu << " outside grid [" << config_.link_mu_min << ", "
         << config_.mu_upper() << "]";
    else
      os << "h(theta) = " << link_theta << " outside grid [" << config_.link_theta_min << ", "
         << config_.theta_upper() << "]";
    throw GridBoundsError(mu_bad ? "link_mu" : "link_theta", mu_bad ? link_mu : link_theta,
                          os.str());
  }
  const auto [i, j, fx, fy] = *cell;
  const double v00 = value(layer, i, j), v10 = value(layer, i + 1, j);
  const double v01 = value(layer, i, j + 1), v11 = value(layer, i + 1, j + 1);
  if (fx == 0.0 && fy == 0.0) return v00;
  return (1.0 - fx) * (1.0 - fy) * v00 + fx * (1.0 - fy) * v10 + (1.0 - fx) * fy * v01 +
         fx * fy * v11;
}

std::optional<LogZTerms> NormalizingGrid::terms(double link_mu, double link_theta,
                                                Weight w) const {
  const std::size_t layer = layer_index(w);
  const auto cell = locate(link_mu, link_theta);
  if (!cell) return std::nullopt;
  const auto [i, j, fx, fy] = *cell;
  const double v00 = value(layer, i, j), v10 = value(layer, i + 1, j);
  const double v01 = value(layer, i, j + 1), v11 = value(layer, i + 1, j + 1);
  LogZTerms t;
  t.value = (fx == 0.0 && fy == 0.0)
                ? v00
                : (1.0 - fx) * (1.0 - fy) * v00 + fx * (1.0 - fy) * v10 +
                      (1.0 - fx) * fy * v01 + fx * fy * v11;
  t.d_mu = ((1.0 - fy) * (v10 - v00) + fy * (v11 - v01)) / config_.link_mu_step;
  t.d_theta = ((1.0 - fx) * (v01 - v00) + fx * (v11 - v10)) / config_.link_theta_step;
  return t;
}

std::optional<double> NormalizingGrid::theta_one_slice_max_abs() const {
  const double pos = -config_.link_theta_min / config_.link_theta_step;
  const double nearest = std::round(pos);
  if (std::abs(pos - nearest) > kNodeSnap || nearest < 0.0 ||
      nearest > static_cast<double>(theta_points_ - 1))
    return std::nullopt;
  const auto j = static_cast<std::size_t>(nearest);
  double worst = 0.0;
  for (std::size_t layer = 0; layer < config_.weights.size(); ++layer)
    for (std::size_t i = 0; i < mu_points_; ++i)
      worst = std::max(worst, std::abs(value(layer, i, j)));
  return worst;
}

NormalizingGrid build_grid(const ExponentialFamily& fam, const GridConfig& cfg) {
  cfg.validate();
  if (fam.id == Family::Poisson && cfg.mu_upper() > kPoissonMaxLinkMu)
    throw ConfigError("Poisson grids must keep g(mu) at or below 50 log 2");
  for (Weight w : cfg.weights) fam.check_weight(w);
  const std::size_t nm = cfg.mu_points(), nt = cfg.theta_points();
  std::vector<double> values(cfg.weights.size() * nm * nt);
  std::size_t unconverged = 0;
  std::size_t idx = 0;
  for (Weight w : cfg.weights) {
    for (std::size_t i = 0; i < nm; ++i) {
      for (std::size_t j = 0; j < nt; ++j, ++idx) {
        try {
          const auto r = brute_force_terms(fam, cfg.mu_node(i), cfg.theta_node(j), w,
                                           cfg.truncation);
          if (!r.tail_converged) ++unconverged;
          values[idx] = r.terms.value;
        } catch (const std::exception& e) {
          std::ostringstream os;
          os << "grid node (weight " << w.a << ", g(mu) " << cfg.mu_node(i) << ", h(theta) "
             << cfg.theta_node(j) << "): " << e.what();
          throw NumericalError(os.str());
        }
        if (!std::isfinite(values[idx])) {
          std::ostringstream os;
          os << "non-finite log Z at grid node (weight " << w.a << ", g(mu) " << cfg.mu_node(i)
             << ", h(theta) " << cfg.theta_node(j) << ")";
          throw NumericalError(os.str());
        }
      }
    }
  }
  if (unconverged > 0)
    spdlog::warn("{} of {} grid nodes were not converged at truncation {}", unconverged,
                 values.size(), cfg.truncation);
  return NormalizingGrid(fam, cfg, std::move(values), unconverged);
}

double log_Z(const NormalizingGrid& grid, double mu, double theta, Weight w) {
  if (!(theta > 0.0)) throw DomainError("theta must be positive");
  return grid.log_z(grid.family().canonical_param(mu), std::log(theta), grid.layer_index(w));
}

std::optional<LogZTerms> ExactNormalizer::terms(double link_mu, double link_theta,
                                                Weight w) const {
  if (!std::isfinite(link_mu) || !(std::abs(link_theta) <= kMaxAbsLinkTheta)) return std::nullopt;
  if (family_.id == Family::Gaussian) return LogZTerms{};
  if (family_.id == Family::Poisson && link_mu > kPoissonMaxLinkMu) return std::nullopt;
  return brute_force_terms(family_, link_mu, link_theta, w, truncation_).terms;
}

double log_double_density(const ExponentialFamily& fam, const Normalizer& norm, double y,
                          double mu, double theta, Weight w) {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw DomainError("theta must be positive");
  const double psi = fam.canonical_param(mu);
  const double log_theta = std::log(theta);
  double log_z = 0.0;
  if (const auto* grid = dynamic_cast<const NormalizingGrid*>(&norm)) {
    log_z = grid->log_z(psi, log_theta, grid->layer_index(w));
  } else {
    const auto t = norm.terms(psi, log_theta, w);
    if (!t) throw GridBoundsError("link_mu", psi, "normalizer unavailable at this point");
    log_z = t->value;
  }
  const double base = log_density_natural(fam, y, psi, w);
  const double sat = log_saturated_density(fam, y, w);
  return log_z + 0.5 * log_theta + theta * base + (1.0 - theta) * sat;
}

std::pair<double, double> approx_moments(const ExponentialFamily& fam, double mu, double theta,
                                         Weight w) {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw DomainError("theta must be positive");
  return {mu, variance_function(fam, mu, w) / theta};
}

double draw_double(const ExponentialFamily& fam, double link_mu, double link_theta, Weight w,
                   Rng& rng, std::uint32_t truncation) {
  fam.check_weight(w);
  fam.check_natural(link_mu);
  if (!(std::abs(link_theta) <= kMaxAbsLinkTheta)) throw DomainError("dispersion link must lie within [-50, 50]");
  const double theta = std::exp(link_theta);
  if (fam.id == Family::Gaussian)
    return draw_normal(rng, link_mu, std::sqrt(fam.phi / (w.a * theta)));
  const double log_z = brute_force_terms(fam, link_mu, link_theta, w, truncation).terms.value;
  const double u = draw_uniform(rng);
  double cum = 0.0;
  if (fam.id == Family::Binomial) {
    const auto n = static_cast<std::uint32_t>(std::lround(w.a));
    for (std::uint32_t k = 0; k < n; ++k) {
      const double y = static_cast<double>(k) / w.a;
      cum += std::exp(log_z + 0.5 * link_theta +
                      theta * log_density_natural(fam, y, link_mu, w) +
                      (1.0 - theta) * log_saturated_density(fam, y, w));
      if (u < cum) return y;
    }
    return 1.0;
  }
  const double mu = std::exp(link_mu);
  const double sd = std::sqrt(mu / theta);
  double y = 0.0;
  if (mu >= 10.0 * sd + 10.0) y = std::floor(std::max(0.0, mu - 14.0 * sd - 10.0));
  const double limit = std::max(static_cast<double>(truncation), mu + 60.0 * sd + 100.0);
  for (; y < limit; y += 1.0) {
    const double dev = -poisson_half_deviance(y, mu);
    cum += std::exp(log_z + 0.5 * link_theta + theta * dev + poisson_log_saturated(y));
    if (u < cum) return y;
  }
  spdlog::warn("double Poisson draw reached its summation limit at mu={} theta={}", mu, theta);
  return y;
}

namespace {

constexpr char kGridMagic[4] = {'D', 'X', 'G', 'Z'};

template <typename T>
void put_le(std::ostream& out, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
  const U bits = std::bit_cast<U>(v);
  char buf[sizeof(T)];
  for (std::size_t k = 0; k < sizeof(T); ++k) buf[k] = static_cast<char>((bits >> (8 * k)) & 0xff);
  out.write(buf, sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T)))
    throw FormatError("grid file truncated");
  U bits = 0;
  for (std::size_t k = 0; k < sizeof(T); ++k) bits |= static_cast<U>(buf[k]) << (8 * k);
  return std::bit_cast<T>(bits);
}

}  // namespace

void write_grid(std::ostream& out, const NormalizingGrid& grid) {
  const auto& cfg = grid.config();
  out.write(kGridMagic, 4);
  put_le<std::uint32_t>(out, kGridFormatVersion);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(grid.family().id));
  for (double v : {cfg.link_mu_min, cfg.link_mu_max, cfg.link_mu_step, cfg.link_theta_min,
                   cfg.link_theta_max, cfg.link_theta_step})
    put_le<double>(out, v);
  put_le<std::uint32_t>(out, cfg.truncation);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.weights.size()));
  for (Weight w : cfg.weights) put_le<double>(out, w.a);
  for (double v : grid.values()) put_le<double>(out, v);
  if (!out) throw FormatError("failed writing grid");
}

NormalizingGrid read_grid(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kGridMagic))
    throw FormatError("not a grid file (bad magic)");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kGridFormatVersion)
    throw FormatError("unsupported grid format version " + std::to_string(version));
  const auto fid = get_le<std::uint8_t>(in);
  if (fid > static_cast<std::uint8_t>(Family::Gaussian)) throw FormatError("unknown family id in grid");
  GridConfig cfg;
  cfg.link_mu_min = get_le<double>(in);
  cfg.link_mu_max = get_le<double>(in);
  cfg.link_mu_step = get_le<double>(in);
  cfg.link_theta_min = get_le<double>(in);
  cfg.link_theta_max = get_le<double>(in);
  cfg.link_theta_step = get_le<double>(in);
  cfg.truncation = get_le<std::uint32_t>(in);
  const auto nw = get_le<std::uint32_t>(in);
  if (nw == 0 || nw > 1'000'000) throw FormatError("implausible grid weight count");
  cfg.weights.assign(nw, Weight{});
  for (auto& w : cfg.weights) w.a = get_le<double>(in);
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("grid header invalid: ") + e.what());
  }
  std::vector<double> values(nw * cfg.mu_points() * cfg.theta_points());
  for (auto& v : values) v = get_le<double>(in);
  ExponentialFamily fam{static_cast<Family>(fid), 1.0};
  return NormalizingGrid(fam, std::move(cfg), std::move(values));
}

void save_grid(const std::filesystem::path& path, const NormalizingGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_grid(out, grid);
}

NormalizingGrid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_grid(in);
}

}  // namespace dexreg
