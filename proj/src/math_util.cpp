#include "spathmm/math_util.hpp"

#include <cmath>

#include "spathmm/errors.hpp"

namespace spathmm {

namespace {

double acklam_inverse_cdf(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double q, r;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p <= 1.0 - plow) {
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  q = std::sqrt(-2.0 * std::log(1.0 - p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

}  // namespace

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    fail(ErrorCode::RangeError, "std_normal_quantile requires p in (0,1)");
  }
  double x = acklam_inverse_cdf(p);
  // One Halley refinement against the exact CDF.
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

double quantile(std::vector<double> xs, double p) {
  if (xs.empty()) fail(ErrorCode::DegenerateInput, "quantile of empty sample");
  if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::RangeError, "quantile p outside [0,1]");
  std::sort(xs.begin(), xs.end());
  const double h = (static_cast<double>(xs.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  const double w = h - static_cast<double>(lo);
  return (1.0 - w) * xs[lo] + w * xs[hi];
}

double gamma_variate(double alpha, std::mt19937_64& rng) {
  if (!(alpha > 0.0)) fail(ErrorCode::RangeError, "gamma_variate requires alpha > 0");
  if (alpha < 1.0) {
    const double u = 1.0 - uniform01(rng);  // (0,1]: keeps the boost positive
    return gamma_variate(alpha + 1.0, rng) * std::pow(u, 1.0 / alpha);
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal01(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform01(rng);
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<double> dirichlet_variate(std::span<const double> alpha, std::mt19937_64& rng) {
  if (alpha.empty()) fail(ErrorCode::DegenerateInput, "dirichlet_variate with no components");
  std::vector<double> x(alpha.size());
  double total = 0.0;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    x[k] = gamma_variate(alpha[k], rng);
    total += x[k];
  }
  double partial = 0.0;
  for (std::size_t k = 0; k + 1 < x.size(); ++k) {
    x[k] /= total;
    partial += x[k];
  }
  x.back() = 1.0 - partial;
  return x;
}

}  // namespace spathmm
