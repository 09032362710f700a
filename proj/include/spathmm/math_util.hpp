#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace spathmm {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLogTwoPi = 1.8378770664093454836;  // log(2*pi)

inline double inv_logit(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow/underflow.
inline double log1pexp(double x) {
  if (x <= -37.0) return std::exp(x);
  if (x <= 18.0) return std::log1p(std::exp(x));
  if (x <= 33.3) return x + std::exp(-x);
  return x;
}

// Bernoulli log-pmf on the logit scale: y=1 -> -log1pexp(-eta), y=0 -> -log1pexp(eta).
inline double bernoulli_logit_lpmf(int y, double eta) {
  return -log1pexp(y ? -eta : eta);
}

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double log_sum_exp(std::span<const double> xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

inline double normal_lpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * kLogTwoPi;
}

inline double std_normal_lpdf(double z) { return -0.5 * z * z - 0.5 * kLogTwoPi; }

// log Phi(z), stable into the deep lower tail.
inline double normal_lcdf(double z) {
  if (z > -20.0) {
    return std::log(0.5 * std::erfc(-z / std::sqrt(2.0)));
  }
  // Asymptotic expansion of the Gaussian tail for large negative z.
  const double z2 = z * z;
  return -0.5 * z2 - 0.5 * kLogTwoPi - std::log(-z) +
         std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

// log(1 - Phi(z)) = log Phi(-z).
inline double normal_lccdf(double z) { return normal_lcdf(-z); }

// phi(z) / (1 - Phi(z)), the inverse Mills ratio.
inline double mills_ratio_inv(double z) {
  return std::exp(std_normal_lpdf(z) - normal_lccdf(z));
}

// Quantile function of the standard normal (Acklam's rational approximation,
// refined with one Halley step; absolute error < 1e-15 over (0,1)).
double std_normal_quantile(double p);

// Dirichlet log-density at x (length K) with concentrations alpha (length K).
inline double dirichlet_lpdf(std::span<const double> x, std::span<const double> alpha) {
  double lp = 0.0;
  double alpha_sum = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    lp += (alpha[k] - 1.0) * std::log(x[k]) - std::lgamma(alpha[k]);
    alpha_sum += alpha[k];
  }
  return lp + std::lgamma(alpha_sum);
}

inline double mean_of(std::span<const double> xs) {
  double acc = 0.0;
  for (double x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

inline double variance_of(std::span<const double> xs) {
  const double m = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return acc / static_cast<double>(xs.size() - 1);
}

// Type-7 (linear interpolation) quantile of an unsorted sample.
double quantile(std::vector<double> xs, double p);

// SplitMix64; used to derive independent per-chain seeds from one master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t s = master;
  std::uint64_t a = splitmix64(s);
  s = master ^ (0x6a09e667f3bcc909ULL + stream * 0x3c6ef372fe94f82bULL);
  return a ^ splitmix64(s);
}

// Variate generators are hand-pinned (not std::*_distribution) so that a seed
// reproduces the same stream on any standard library.

// 53-bit uniform in [0,1).
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller; one variate per call.
inline double normal01(std::mt19937_64& rng) {
  const double u1 = 1.0 - uniform01(rng);  // in (0,1], keeps the log finite
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Marsaglia-Tsang with the alpha<1 boost.
double gamma_variate(double alpha, std::mt19937_64& rng);

// Dirichlet(alpha) via normalized gammas; exact simplex closure on the last
// coordinate.
std::vector<double> dirichlet_variate(std::span<const double> alpha, std::mt19937_64& rng);

}  // namespace spathmm
