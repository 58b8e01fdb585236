#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace epm::detail {

inline double uniform_node(double end, std::size_t i, std::size_t n) {
  if (i + 1 == n) return end;
  return end * static_cast<double>(i) / static_cast<double>(n - 1);
}

inline std::vector<double> uniform_grid(double end, std::size_t n) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = uniform_node(end, i, n);
  return t;
}

// Linear interpolation of samples on a uniform grid over [0, end], clamped at both ends.
inline double interp_uniform(std::span<const double> v, double end, double t) {
  const std::size_t n = v.size();
  if (t <= 0.0) return v.front();
  if (t >= end) return v.back();
  const double x = t / end * static_cast<double>(n - 1);
  auto i = static_cast<std::size_t>(x);
  if (i > n - 2) i = n - 2;
  const double w = x - static_cast<double>(i);
  return v[i] + w * (v[i + 1] - v[i]);
}

// Derivative of the piecewise-linear interpolant. At a knot (within knot_tol cells)
// the two adjacent slopes are averaged, which is what a symmetric difference sees.
inline double slope_uniform(std::span<const double> v, double end, double t,
                            double knot_tol = 1e-9) {
  const std::size_t n = v.size();
  const double h = end / static_cast<double>(n - 1);
  if (t <= 0.0) return (v[1] - v[0]) / h;
  if (t >= end) return (v[n - 1] - v[n - 2]) / h;
  const double x = t / h;
  const double k = std::round(x);
  if (std::abs(x - k) < knot_tol) {
    const auto kk = static_cast<std::size_t>(k);
    if (kk == 0) return (v[1] - v[0]) / h;
    if (kk >= n - 1) return (v[n - 1] - v[n - 2]) / h;
    return (v[kk + 1] - v[kk - 1]) / (2.0 * h);
  }
  auto i = static_cast<std::size_t>(x);
  if (i > n - 2) i = n - 2;
  return (v[i + 1] - v[i]) / h;
}

// Node slope for cubic Hermite interpolation: central inside, one-sided second order at ends.
inline double node_slope(std::span<const double> v, std::size_t i, double h) {
  const std::size_t n = v.size();
  if (n == 2) return (v[1] - v[0]) / h;
  if (i == 0) return (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
  if (i == n - 1) return (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
  return (v[i + 1] - v[i - 1]) / (2.0 * h);
}

struct ValueSlope {
  double value;
  double slope;
};

// C1 cubic Hermite interpolant of uniform samples on [0, end] with finite-difference
// node slopes, clamped to [0, end].
inline ValueSlope hermite_uniform(std::span<const double> v, double end, double t) {
  const std::size_t n = v.size();
  const double h = end / static_cast<double>(n - 1);
  t = std::clamp(t, 0.0, end);
  auto i = static_cast<std::size_t>(t / h);
  if (i > n - 2) i = n - 2;
  const double s = std::clamp((t - static_cast<double>(i) * h) / h, 0.0, 1.0);
  const double p0 = v[i];
  const double p1 = v[i + 1];
  const double m0 = node_slope(v, i, h) * h;
  const double m1 = node_slope(v, i + 1, h) * h;
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double value = (2 * s3 - 3 * s2 + 1) * p0 + (s3 - 2 * s2 + s) * m0 +
                       (-2 * s3 + 3 * s2) * p1 + (s3 - s2) * m1;
  const double ds = (6 * s2 - 6 * s) * p0 + (3 * s2 - 4 * s + 1) * m0 + (-6 * s2 + 6 * s) * p1 +
                    (3 * s2 - 2 * s) * m1;
  return {value, ds / h};
}

// Trapezoid weights on the uniform grid of n points over [0, end].
inline std::vector<double> trapezoid_weights(std::size_t n, double end = 1.0) {
  const double h = end / static_cast<double>(n - 1);
  std::vector<double> w(n, h);
  w.front() = w.back() = 0.5 * h;
  return w;
}

inline double trapezoid(std::span<const double> v, double end) {
  const std::size_t n = v.size();
  const double h = end / static_cast<double>(n - 1);
  double s = 0.5 * (v.front() + v.back());
  for (std::size_t i = 1; i + 1 < n; ++i) s += v[i];
  return s * h;
}

inline std::vector<double> cumulative_trapezoid(std::span<const double> v, double end) {
  const std::size_t n = v.size();
  const double h = end / static_cast<double>(n - 1);
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) out[i] = out[i - 1] + 0.5 * h * (v[i - 1] + v[i]);
  return out;
}

// Second-order finite differences: central inside, one-sided three-point at the ends.
inline std::vector<double> gradient_uniform(std::span<const double> v, double h) {
  const std::size_t n = v.size();
  std::vector<double> d(n);
  if (n == 2) {
    d[0] = d[1] = (v[1] - v[0]) / h;
    return d;
  }
  d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
  d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
  return d;
}

// Exact integral of the square of a linear segment with end values a, b.
inline double segment_square(double a, double b, double len) {
  return len * (a * a + a * b + b * b) / 3.0;
}

// Exact integral of v^2 over [lo, hi] for the interpolant of uniform samples on [0, end].
inline double integral_square(std::span<const double> v, double end, double lo, double hi) {
  lo = std::max(lo, 0.0);
  hi = std::min(hi, end);
  if (!(hi > lo)) return 0.0;
  const std::size_t n = v.size();
  const double h = end / static_cast<double>(n - 1);
  auto first = static_cast<std::size_t>(lo / h);
  if (first > n - 2) first = n - 2;
  double s = 0.0;
  for (std::size_t i = first; i + 1 < n; ++i) {
    const double a = uniform_node(end, i, n);
    const double b = uniform_node(end, i + 1, n);
    if (a >= hi) break;
    const double u = std::max(a, lo);
    const double w = std::min(b, hi);
    if (w > u) s += segment_square(interp_uniform(v, end, u), interp_uniform(v, end, w), w - u);
  }
  return s;
}

// Sorted union of knot sets with near-duplicates (relative to scale) dropped.
inline std::vector<double> merge_knots(std::vector<double> knots, double scale) {
  std::sort(knots.begin(), knots.end());
  const double tol = 1e-13 * std::max(scale, 1e-300);
  std::vector<double> out;
  out.reserve(knots.size());
  for (double k : knots) {
    if (out.empty() || k - out.back() > tol) out.push_back(k);
  }
  return out;
}

}  // namespace epm::detail
