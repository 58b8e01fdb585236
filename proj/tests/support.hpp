#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "epm/epm.hpp"

namespace epm::test {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Smooth function on [0, c]: a few random bumps plus a linear trend.
inline CensoredFunction random_function(Rng& rng, double c, std::size_t n) {
  const int bumps = 1 + static_cast<int>(rng() % 3);
  std::vector<double> mu(bumps), sd(bumps), amp(bumps);
  for (int k = 0; k < bumps; ++k) {
    mu[k] = uniform(rng, 0.1, 0.9) * c;
    sd[k] = uniform(rng, 0.08, 0.2) * c;
    amp[k] = uniform(rng, 0.5, 2.0);
  }
  const double slope = uniform(rng, -0.5, 0.5);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = detail::uniform_node(c, i, n);
    double s = slope * t;
    for (int k = 0; k < bumps; ++k) s += amp[k] * std::exp(-0.5 * std::pow((t - mu[k]) / sd[k], 2));
    v[i] = s;
  }
  return CensoredFunction(c, std::move(v));
}

inline CensoredSrvf random_srvf(Rng& rng, double c, std::size_t n) {
  return srvf_from_function(random_function(rng, c, n));
}

// Smooth SRVF on [0, c] given directly: offset plus three random harmonics.
inline CensoredSrvf smooth_srvf(Rng& rng, double c, std::size_t n) {
  const double a0 = uniform(rng, -1.0, 1.0);
  double a[3];
  double ph[3];
  for (int k = 0; k < 3; ++k) {
    a[k] = uniform(rng, 0.3, 1.2) / (k + 1);
    ph[k] = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  }
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = detail::uniform_node(1.0, i, n);
    double s = a0;
    for (int k = 0; k < 3; ++k) s += a[k] * std::sin(2.0 * std::numbers::pi * (k + 1) * x + ph[k]);
    v[i] = s;
  }
  return CensoredSrvf(c, std::move(v));
}

inline Warp random_unit_warp(Rng& rng, double roughness = 0.3, std::size_t n = 100) {
  return random_warp(1.0, roughness, rng, n);
}

inline GroupElement random_group_element(Rng& rng, double a_lo = 0.6, double a_hi = 1.6,
                                         double b_lo = 0.3, double b_hi = 1.2) {
  return GroupElement(uniform(rng, a_lo, a_hi), uniform(rng, b_lo, b_hi), random_unit_warp(rng));
}

// Zero-mean smooth tangent vector on m points with |z| scaled to `size`.
inline TangentVector random_tangent(Rng& rng, std::size_t m, double y_scale, double size) {
  std::vector<double> z(m);
  const double c1 = uniform(rng, -1, 1);
  const double c2 = uniform(rng, -1, 1);
  const double c3 = uniform(rng, -1, 1);
  for (std::size_t j = 0; j < m; ++j) {
    const double x = detail::uniform_node(1.0, j, m);
    z[j] = c1 * std::sin(2 * std::numbers::pi * x) + c2 * std::cos(2 * std::numbers::pi * x) +
           c3 * std::sin(4 * std::numbers::pi * x);
  }
  const double mean = detail::unit_mean(z);
  for (double& v : z) v -= mean;
  double nz = std::sqrt(detail::unit_inner(z, z));
  if (nz > 0.0)
    for (double& v : z) v *= size / nz;
  return TangentVector(uniform(rng, -y_scale, y_scale), std::move(z));
}

inline ParamPoint random_param_point(Rng& rng, std::size_t m, double y_scale = 0.3,
                                     double size = 0.4) {
  return exp_identity(random_tangent(rng, m, y_scale, size));
}

}  // namespace epm::test
