#pragma once

// Tail probabilities for the t, chi-square and normal distributions, built on
// the regularized incomplete beta and gamma functions.

#include <cmath>
#include <limits>

#include "medsim/core/error.hpp"

namespace medsim::analytics::special {

inline constexpr int kMaxIterations = 10000;
inline constexpr double kEpsilon = 1e-16;
inline constexpr double kTiny = 1e-300;

inline double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

namespace detail {

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
inline double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEpsilon) return h;
  }
  throw Error("no_convergence", "incomplete beta continued fraction did not converge");
}

inline double gamma_series(double a, double x) {
  double ap = a, sum = 1.0 / a, del = sum;
  for (int n = 1; n <= kMaxIterations; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kEpsilon)
      return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  throw Error("no_convergence", "incomplete gamma series did not converge");
}

inline double gamma_continued_fraction(double a, double x) {
  double b = x + 1.0 - a, c = 1.0 / kTiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= kMaxIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEpsilon)
      return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
  }
  throw Error("no_convergence", "incomplete gamma continued fraction did not converge");
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b), a, b > 0, x in [0, 1].
inline double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0) || !(x >= 0.0) || !(x <= 1.0))
    throw Error("domain_error", "incomplete_beta requires a, b > 0 and 0 <= x <= 1");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double front =
      std::exp(a * std::log(x) + b * std::log1p(-x) - log_beta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

// Regularized lower incomplete gamma P(a, x).
inline double incomplete_gamma_p(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0))
    throw Error("domain_error", "incomplete_gamma requires a > 0 and x >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return detail::gamma_series(a, x);
  return 1.0 - detail::gamma_continued_fraction(a, x);
}

// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
inline double incomplete_gamma_q(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0))
    throw Error("domain_error", "incomplete_gamma requires a > 0 and x >= 0");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_series(a, x);
  return detail::gamma_continued_fraction(a, x);
}

// P(T > t) for Student's t with `df` degrees of freedom (df may be fractional).
inline double student_t_sf(double t, double df) {
  if (!(df > 0.0)) throw Error("domain_error", "t distribution requires df > 0");
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
  return t >= 0.0 ? tail : 1.0 - tail;
}

inline double student_t_cdf(double t, double df) { return 1.0 - student_t_sf(t, df); }

// Two-sided p-value P(|T| >= |t|).
inline double student_t_two_sided(double t, double df) {
  if (!(df > 0.0)) throw Error("domain_error", "t distribution requires df > 0");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

// P(X > x) for chi-square with k degrees of freedom.
inline double chi_square_sf(double x, double k) {
  if (!(k > 0.0)) throw Error("domain_error", "chi-square requires k > 0");
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return incomplete_gamma_q(0.5 * k, 0.5 * x);
}

inline double chi_square_cdf(double x, double k) { return 1.0 - chi_square_sf(x, k); }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double normal_two_sided(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

}  // namespace medsim::analytics::special
