#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "rescam/geometry.hpp"

namespace rescam {

using Rng = std::mt19937_64;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double log_sum_exp(std::span<const double> xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

// Draws an index from unnormalized log weights. If every weight is -inf the
// draw is uniform.
inline std::size_t sample_log_categorical(std::span<const double> logw, Rng& rng) {
  if (logw.empty()) throw std::invalid_argument("sample from empty categorical");
  double m = kNegInf;
  for (double x : logw) m = std::max(m, x);
  if (m == kNegInf) return std::uniform_int_distribution<std::size_t>(0, logw.size() - 1)(rng);
  double total = 0.0;
  for (double x : logw) total += std::exp(x - m);
  double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < logw.size(); ++i) {
    u -= std::exp(logw[i] - m);
    if (u <= 0.0) return i;
  }
  for (std::size_t i = logw.size(); i-- > 0;)
    if (logw[i] != kNegInf) return i;
  return logw.size() - 1;
}

// log I0(x). Scaled power series below 30, Hankel asymptotic expansion above.
inline double log_bessel_i0(double x) {
  x = std::abs(x);
  if (x < 30.0) {
    const double q = 0.25 * x * x;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 400; ++k) {
      term *= q / (static_cast<double>(k) * k);
      sum += term;
      if (term < sum * 1e-17) break;
    }
    return std::log(sum);
  }
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 40; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= odd * odd / (8.0 * x * k);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return x - 0.5 * std::log(kTwoPi * x) + std::log(sum);
}

struct VonMises {
  double nu = 0.0;     // mean angle
  double kappa = 0.0;  // concentration; 0 is the uniform limit
};

inline double vm_logpdf(double theta, const VonMises& p) {
  return p.kappa * std::cos(theta - p.nu) - std::log(kTwoPi) - log_bessel_i0(p.kappa);
}

// Best & Fisher (1979) rejection sampler. Result wrapped into [0, 2pi).
inline double vm_sample(const VonMises& p, Rng& rng) {
  if (p.kappa < 1e-8) return uniform01(rng) * kTwoPi;
  const double tau = 1.0 + std::sqrt(1.0 + 4.0 * p.kappa * p.kappa);
  const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * p.kappa);
  const double r = (1.0 + rho * rho) / (2.0 * rho);
  for (;;) {
    const double u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    const double u3 = uniform01(rng);
    const double z = std::cos(std::numbers::pi * u1);
    const double f = std::clamp((1.0 + r * z) / (r + z), -1.0, 1.0);
    const double c = p.kappa * (r - f);
    if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) {
      const double delta = std::acos(f);
      return wrap_angle(u3 > 0.5 ? p.nu + delta : p.nu - delta);
    }
  }
}

// Shared distance distribution N(l | mu, 1/lambda).
struct DistanceModel {
  double mu = 1.0;
  double lambda = 25.0;  // precision, 1/m^2
};

inline double normal_logpdf(double x, double mean, double precision) {
  const double d = x - mean;
  return 0.5 * std::log(precision / kTwoPi) - 0.5 * precision * d * d;
}

inline double distance_logpdf(double l, const DistanceModel& m) { return normal_logpdf(l, m.mu, m.lambda); }

// Background branch: U(l | 0, e) U(theta | 0, 2pi) over the (l, theta) measure.
inline double background_logpdf(const RelativeCoord& rel, double e) {
  if (rel.l < 0.0 || rel.l > e) return kNegInf;
  return -std::log(e) - std::log(kTwoPi);
}

struct CrpState {
  std::vector<int> counts;
  double alpha = 1.0;

  int total() const {
    int n = 0;
    for (int c : counts) n += c;
    return n;
  }
};

// Predictive over existing clusters followed by one entry for a new cluster.
inline std::vector<double> crp_predictive(const CrpState& s) {
  if (!(s.alpha > 0.0)) throw std::invalid_argument("CRP concentration must be positive");
  const double denom = s.total() + s.alpha;
  std::vector<double> p;
  p.reserve(s.counts.size() + 1);
  for (int c : s.counts) p.push_back(c / denom);
  p.push_back(s.alpha / denom);
  return p;
}

struct Hyperparams {
  // distance: mu ~ N(mu0, 1/lambda0), lambda ~ Gam(a0, b0) (shape, rate)
  double mu0 = 0.0;
  double lambda0 = 1.0;
  double a0 = 1.0;
  double b0 = 1.0;
  // direction: nu ~ vM(nu0, kappa0), kappa ~ logN(m0, sigma0)
  double nu0 = 0.0;
  double kappa0 = 1.0;
  double m0 = 3.0;
  double sigma0 = 0.3;
  double e = 5.0;  // background max distance [m]
  double alphaR = 1.0;
  double betaR = 0.1;
  double betaPsi = 0.1;
  double gammaPi = 1.0;
  double gammaZ = 1.0;
  // object extension
  double alphaO = 1.0;
  double betaO = 0.1;

  void validate() const {
    const double positive[] = {lambda0, a0, b0, kappa0, sigma0, e, alphaR, betaR, betaPsi,
                               gammaPi, gammaZ, alphaO, betaO};
    for (double v : positive)
      if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("hyperparameters must be positive and finite");
    if (!std::isfinite(mu0) || !std::isfinite(nu0) || !std::isfinite(m0))
      throw std::invalid_argument("hyperparameters must be finite");
  }
};

inline double sample_normal(double mean, double precision, Rng& rng) {
  return std::normal_distribution<double>(mean, 1.0 / std::sqrt(precision))(rng);
}

inline double sample_gamma(double shape, double rate, Rng& rng) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

inline double sample_lognormal(double m, double s, Rng& rng) {
  return std::lognormal_distribution<double>(m, s)(rng);
}

// log of a Gamma(shape, 1) draw; stays finite for tiny shapes where the draw
// itself underflows.
inline double sample_log_gamma(double shape, Rng& rng) {
  if (shape >= 1.0) return std::log(std::gamma_distribution<double>(shape, 1.0)(rng));
  const double g = std::gamma_distribution<double>(shape + 1.0, 1.0)(rng);
  double u = uniform01(rng);
  while (u <= 0.0) u = uniform01(rng);
  return std::log(g) + std::log(u) / shape;
}

// Dirichlet draw returned as log-probabilities.
inline std::vector<double> sample_log_dirichlet(std::span<const double> alpha, Rng& rng) {
  std::vector<double> out(alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) out[i] = sample_log_gamma(alpha[i], rng);
  const double z = log_sum_exp(out);
  for (double& v : out) v -= z;
  return out;
}

// log of one Beta(a, b) draw.
inline double sample_log_beta(double a, double b, Rng& rng) {
  const double x = sample_log_gamma(a, rng);
  const double y = sample_log_gamma(b, rng);
  return x - log_add(x, y);
}

struct PriorDraw {
  DistanceModel dist;
  VonMises direction;
};

inline VonMises sample_direction_prior(const Hyperparams& h, Rng& rng) {
  const double nu = vm_sample({h.nu0, h.kappa0}, rng);
  const double kappa = sample_lognormal(h.m0, h.sigma0, rng);
  return {nu, kappa};
}

inline PriorDraw prior_draws(const Hyperparams& h, Rng& rng) {
  PriorDraw d;
  d.dist.mu = sample_normal(h.mu0, h.lambda0, rng);
  d.dist.lambda = sample_gamma(h.a0, h.b0, rng);
  d.direction = sample_direction_prior(h, rng);
  return d;
}

}  // namespace rescam
