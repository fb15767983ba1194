#pragma once

// Independent distribution functions by direct numerical integration of the
// densities in extended precision. Test-only.

#include <cmath>
#include <utility>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

namespace medsim::testing {

inline long double t_density(long double t, long double df) {
  const long double log_norm = std::lgamma((df + 1.0L) / 2.0L) - std::lgamma(df / 2.0L) -
                               0.5L * std::log(df * 3.141592653589793238462643383279502884L);
  return std::exp(log_norm - (df + 1.0L) / 2.0L * std::log1p(t * t / df));
}

// P(T > t) as 1/2 minus the integral of the density over [0, t].
inline long double t_sf_quadrature(long double t, long double df) {
  boost::math::quadrature::tanh_sinh<long double> integrator;
  const long double a = std::fabs(t);
  long double mass = 0.0L;
  if (a > 0) mass = integrator.integrate([&](long double x) { return t_density(x, df); }, 0.0L, a);
  return t >= 0 ? 0.5L - mass : 0.5L + mass;
}

inline long double chi_square_density(long double x, long double k) {
  if (x <= 0) return 0.0L;
  const long double half = k / 2.0L;
  return std::exp((half - 1.0L) * std::log(x) - x / 2.0L - half * std::log(2.0L) - std::lgamma(half));
}

// P(X <= x), endpoint singularity at 0 for k < 2 handled by tanh-sinh.
inline long double chi_square_cdf_quadrature(long double x, long double k) {
  boost::math::quadrature::tanh_sinh<long double> integrator;
  return integrator.integrate([&](long double u) { return chi_square_density(u, k); }, 0.0L, x);
}

// Fixed evaluation grids: (statistic, degrees of freedom).
inline std::vector<std::pair<double, double>> t_grid() {
  return {{-4.0, 3.0},  {-2.5, 10.0}, {-1.0, 1.0},   {-0.3, 5.5},  {0.0, 7.0},
          {0.1, 2.0},   {0.7, 30.0},  {1.0, 1.0},    {1.5, 4.0},   {1.96, 1000.0},
          {2.0, 15.0},  {2.5, 0.8},   {3.0, 60.0},   {3.5, 9.0},   {4.2, 195.57},
          {5.262, 195.57}, {6.0, 12.0}, {8.0, 40.0}, {-5.262, 195.57}, {10.0, 3.0}};
}

inline std::vector<std::pair<double, double>> chi_square_grid() {
  return {{0.05, 1.0}, {0.5, 1.0},  {1.0, 1.0},  {3.84, 1.0},  {0.5, 2.0},
          {2.0, 2.0},  {5.99, 2.0}, {1.0, 3.0},  {7.81, 3.0},  {2.0, 4.0},
          {9.49, 4.0}, {0.3, 0.5},  {4.0, 5.0},  {12.0, 5.0},  {10.0, 10.0},
          {25.0, 10.0}, {30.0, 20.0}, {50.0, 29.0}, {15.0, 2.0}, {40.0, 8.0}};
}

}  // namespace medsim::testing
