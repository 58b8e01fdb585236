#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "epm/core.hpp"
#include "epm/group_geometry.hpp"
#include "epm/registration.hpp"

namespace epm {

struct MatchConfig {
  double lambda = 0.25;
  double scale_lo = 0.5;
  double scale_hi = 2.0;
  int grid_size = 50;
  double tol_eps = 1e-4;
  int max_iters = 200;
  double step_delta = 1e-4;
  double beta = 0.1;
  double tau = 0.5;
  double min_step = 1e-12;
  int dp_max_slope = 4;
  // 0 means "largest input sample count".
  std::size_t dp_samples = 0;
  std::size_t psi_samples = 0;

  void validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw invalid_input("lambda must be > 0");
    if (!(beta > 0.0 && beta < 1.0)) throw invalid_input("beta must lie in (0, 1)");
    if (!(tau > 0.0 && tau < 1.0)) throw invalid_input("tau must lie in (0, 1)");
    if (!(scale_lo > 0.0) || !(scale_hi >= scale_lo) || !std::isfinite(scale_hi))
      throw invalid_input("grid scales must satisfy 0 < lo <= hi");
    if (grid_size < 1) throw invalid_input("grid size must be >= 1");
    if (!(tol_eps >= 0.0)) throw invalid_input("tol_eps must be >= 0");
    if (max_iters < 0) throw invalid_input("max_iters must be >= 0");
    if (!(step_delta > 0.0) || !(min_step > 0.0)) throw invalid_input("step sizes must be > 0");
    if (dp_max_slope < 1) throw invalid_input("dp_max_slope must be >= 1");
    if (dp_samples == 1 || dp_samples == 2) throw invalid_input("dp_samples must be 0 or >= 3");
    if (psi_samples == 1 || psi_samples == 2) throw invalid_input("psi_samples must be 0 or >= 3");
  }

  // Log-uniform scale samples; a single sample sits at the geometric midpoint.
  std::vector<double> scales() const {
    if (grid_size == 1) return {std::sqrt(scale_lo * scale_hi)};
    std::vector<double> a(static_cast<std::size_t>(grid_size));
    const double l0 = std::log(scale_lo);
    const double l1 = std::log(scale_hi);
    for (int i = 0; i < grid_size; ++i)
      a[static_cast<std::size_t>(i)] = std::exp(l0 + (l1 - l0) * i / (grid_size - 1));
    a.front() = scale_lo;
    a.back() = scale_hi;
    return a;
  }
};

struct MatchResult {
  GroupElement group_element = GroupElement::identity();
  CensoredSrvf aligned{1.0, {0.0, 0.0, 0.0}};
  double energy = 0.0;
  double dissimilarity = 0.0;
  // Unweighted mismatch over the matched region [0, b].
  double matched_energy = 0.0;
  int iterations = 0;
  bool converged = true;
  std::vector<double> energy_trace;
  std::optional<CensoredFunction> aligned_function;

  double scale() const noexcept { return group_element.scale(); }
};

struct EnergyParts {
  double matched = 0.0;  // integral over [0, b]
  double tail = 0.0;     // integral over [b, max(c1, c2 e^-xi)]
  double pivot = 0.0;    // b
  double total(double lambda) const noexcept { return matched + lambda * tail; }
};

namespace detail {

inline std::size_t resolve_samples(std::size_t requested, const CensoredSrvf& q1,
                                   const CensoredSrvf& q2) {
  return requested != 0 ? requested : std::max(q1.size(), q2.size());
}

// The matched region uses trapezoid quadrature on the psi nodes t_j = b x_j with the
// SRVFs evaluated through their C1 cubic interpolants (so the energy is differentiable
// in xi and psi); the tails are integrals of squared linear interpolants, evaluated exactly.
inline EnergyParts energy_parts(double xi, std::span<const double> psi, std::span<const double> gamma,
                                const CensoredSrvf& q1, const CensoredSrvf& q2) {
  const double c1 = q1.censor_point();
  const double c2 = q2.censor_point();
  const double ea = std::exp(xi);
  const double root = std::exp(0.5 * xi);
  const double c2t = c2 / ea;
  const double b = std::min(c1, c2t);
  const std::size_t m = psi.size();
  double s = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double x = uniform_node(1.0, j, m);
    const double d =
        q1.smooth(b * x).value - q2.smooth(std::min(ea * b * gamma[j], c2)).value * root * psi[j];
    s += (j == 0 || j + 1 == m ? 0.5 : 1.0) * d * d;
  }
  EnergyParts e;
  e.pivot = b;
  e.matched = b * s / static_cast<double>(m - 1);
  if (c2t < c1) {
    e.tail = integral_square(q1.values(), c1, c2t, c1);
  } else if (c1 < c2t) {
    // int_{c1}^{c2t} (q2(e^xi t) e^{xi/2})^2 dt = int_{e^xi c1}^{c2} q2^2
    e.tail = integral_square(q2.values(), c2, ea * c1, c2);
  }
  return e;
}

inline EnergyParts identity_energy_parts(const CensoredSrvf& q1, const CensoredSrvf& q2,
                                         std::size_t m) {
  const std::vector<double> ones(m, 1.0);
  return energy_parts(0.0, ones, uniform_grid(1.0, m), q1, q2);
}

}  // namespace detail

inline EnergyParts energy_parts(const ParamPoint& p, const CensoredSrvf& q1, const CensoredSrvf& q2) {
  return detail::energy_parts(p.xi(), p.psi(), p.warp_values(), q1, q2);
}

// E(xi, psi) = int_0^b (q1 - q2~)^2 + lambda int_b^inf (q1 - q2~)^2, b = min(c1, c2 e^-xi).
inline double energy(const ParamPoint& p, const CensoredSrvf& q1, const CensoredSrvf& q2,
                     double lambda) {
  if (!(lambda > 0.0)) throw invalid_input("energy: lambda must be > 0");
  return energy_parts(p, q1, q2).total(lambda);
}

// Relative gap |c1 - c2| below which the gradient treats the censor points as equal.
inline constexpr double kKinkTolerance = 1e-6;

// Energy of the current pair at the identity, on an m-point psi grid.
inline double energy_at_identity(const CensoredSrvf& q1, const CensoredSrvf& q2, double lambda,
                                 std::size_t m) {
  return detail::identity_energy_parts(q1, q2, m).total(lambda);
}

// Gradient of the energy at the identity on an m-point grid of [0, 1].
//
// y: -2 int (q1 - q2)(t q2' + q2/2) over [0, b], plus the contribution of the tail,
//    whose limits move with xi. When b follows c2 e^-xi the matched window itself
//    shrinks with xi, which adds the boundary term below. Where c1 = c2 (within
//    kKinkTolerance) the energy is not differentiable in xi and y is the descending
//    one-sided slope, or 0 when xi sits at a minimum.
// z: w(x) - int_0^1 w with w(x) = 4b^2 int_0^x (q1 - q2) q2'(b s) ds - 2b (q1 - q2) q2 (b x).
// Both are the exact derivatives of the quadrature used by energy(), so they agree
// with finite differences of energy() through exp_identity.
inline TangentVector energy_gradient_identity(const CensoredSrvf& q1, const CensoredSrvf& q2k,
                                              double lambda, std::size_t m = 100) {
  if (!(lambda > 0.0)) throw invalid_input("energy_gradient_identity: lambda must be > 0");
  if (m < 3) throw invalid_input("energy_gradient_identity: need >= 3 grid points");
  const double c1 = q1.censor_point();
  const double c2 = q2k.censor_point();
  const double b = std::min(c1, c2);
  const double h = 1.0 / static_cast<double>(m - 1);
  const auto w = detail::trapezoid_weights(m, 1.0);

  std::vector<double> d(m), v2(m), s2(m), a(m);
  double eq5 = 0.0;
  double window_sq = 0.0;
  double window_slope = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double x = detail::uniform_node(1.0, j, m);
    const double t = b * x;
    const auto e1 = q1.smooth(t);
    const auto e2 = q2k.smooth(std::min(t, c2));
    v2[j] = e2.value;
    s2[j] = e2.slope;
    d[j] = e1.value - v2[j];
    eq5 += w[j] * d[j] * (t * s2[j] + 0.5 * v2[j]);
    window_sq += w[j] * d[j] * d[j];
    window_slope += w[j] * d[j] * x * (e1.slope - s2[j]);
    a[j] = w[j] * d[j] * s2[j];
  }
  const double y_matched = -2.0 * b * eq5;
  // b = c2 e^-xi < c1: the window [0, b] shrinks and the tail int_b^c1 q1^2 grows.
  const double y_short = y_matched - b * (window_sq + 2.0 * b * window_slope) +
                         lambda * b * q1(b) * q1(b);
  // b = c1 < c2 e^-xi: the tail is int_{e^xi c1}^{c2} q2^2.
  const double y_long = y_matched - lambda * b * q2k(b) * q2k(b);
  double y;
  if (std::abs(c1 - c2) <= kKinkTolerance * std::max(c1, c2)) {
    // The energy has a kink in xi here: y_short is the derivative for increasing xi and
    // y_long for decreasing xi. Take the one-sided slope that descends, or 0 at a minimum.
    const double right = y_short;
    const double left = y_long;
    if (left <= right) {
      y = right < 0.0 ? right : (left > 0.0 ? left : 0.0);
    } else {
      const double r = right < 0.0 ? right : 0.0;
      const double l = left > 0.0 ? left : 0.0;
      y = std::abs(r) >= std::abs(l) ? r : l;
    }
  } else {
    y = c2 < c1 ? y_short : y_long;
  }

  // Running integral V(x_j) = int_0^{x_j} (q1 - q2) q2'(b s) ds with the trapezoid
  // weights of energy(): V_j = R_0 - R_j, R_j = (C^T a)_j / w_j where C is the
  // cumulative-trapezoid operator.
  std::vector<double> tail_sum(m + 1, 0.0);
  for (std::size_t j = m; j-- > 0;) tail_sum[j] = tail_sum[j + 1] + a[j];
  std::vector<double> r(m);
  for (std::size_t j = 0; j < m; ++j)
    r[j] = 0.5 * h * (tail_sum[j + 1] + (j >= 1 ? tail_sum[j] : 0.0)) / w[j];
  std::vector<double> z(m);
  for (std::size_t j = 0; j < m; ++j)
    z[j] = 4.0 * b * b * (r[0] - r[j]) - 2.0 * b * d[j] * v2[j];
  const double mean = detail::trapezoid(z, 1.0);
  for (double& x : z) x -= mean;
  return TangentVector(y, std::move(z));
}

// Grid search: for each scale a_i, register on [0, b_i] by dynamic programming, complete
// the warp with the identity and score the result with the lambda-weighted energy.
inline MatchResult grid_search_align(const CensoredSrvf& q1, const CensoredSrvf& q2,
                                     const MatchConfig& cfg) {
  cfg.validate();
  const double c1 = q1.censor_point();
  const double c2 = q2.censor_point();
  const std::size_t n = detail::resolve_samples(cfg.dp_samples, q1, q2);
  const std::size_t m = detail::resolve_samples(cfg.psi_samples, q1, q2);
  std::optional<MatchResult> best;
  double best_key = 0.0;
  std::vector<double> s1(n), s2(n), unit(n);
  for (double a : cfg.scales()) {
    const double b = std::min(c1, c2 / a);
    const double ra = std::sqrt(a);
    for (std::size_t j = 0; j < n; ++j) {
      const double t = detail::uniform_node(b, j, n);
      s1[j] = q1(t);
      s2[j] = q2(std::min(a * t, c2)) * ra;
    }
    const Alignment al = dp_elastic_align(s1, s2, b, cfg.dp_max_slope);
    const auto gv = al.warp.values();
    for (std::size_t j = 0; j < n; ++j) unit[j] = gv[j] / b;
    unit.back() = 1.0;
    GroupElement g(a, b, Warp::uniform(1.0, unit));
    CensoredSrvf q2i = warp_srvf(q2, g);
    const EnergyParts parts = detail::identity_energy_parts(q1, q2i, m);
    const double e = parts.total(cfg.lambda);
    const double key = std::abs(std::log(a));
    if (!best || e < best->energy || (e == best->energy && key < best_key)) {
      MatchResult r;
      r.group_element = std::move(g);
      r.aligned = std::move(q2i);
      r.energy = e;
      r.dissimilarity = std::sqrt(e);
      r.matched_energy = parts.matched;
      r.energy_trace = {e};
      best = std::move(r);
      best_key = key;
    }
  }
  return std::move(*best);
}

// Riemannian gradient descent on the parameter space, starting from the
// group element init (applied to q2). The state is the composite element G_k; a candidate
// step p is scored on q2 acted on by G_k o M^-1(p), rebuilt from the original q2 so that
// repeated resampling never degrades the current SRVF.
inline MatchResult gradient_descent_align(const CensoredSrvf& q1, const CensoredSrvf& q2,
                                          const GroupElement& init, const MatchConfig& cfg) {
  cfg.validate();
  const double c1 = q1.censor_point();
  const std::size_t m = detail::resolve_samples(cfg.psi_samples, q1, q2);
  const std::size_t samples = std::max<std::size_t>(4 * m, init.unit_warp().size());
  GroupElement composite = init;
  CensoredSrvf qk = warp_srvf(q2, init);
  EnergyParts parts = detail::identity_energy_parts(q1, qk, m);
  double ek = parts.total(cfg.lambda);
  MatchResult r;
  r.energy_trace.push_back(ek);
  int k = 0;
  TangentVector grad = energy_gradient_identity(q1, qk, cfg.lambda, m);
  double gnorm = norm(grad);
  bool converged = gnorm <= cfg.tol_eps;
  while (!converged && k < cfg.max_iters) {
    TangentVector step;
    step.z.resize(m);
    std::optional<GroupElement> next_g;
    std::optional<CensoredSrvf> next;
    EnergyParts next_parts;
    for (double delta = cfg.step_delta; delta >= cfg.min_step; delta *= cfg.tau) {
      step.y = -delta * grad.y;
      for (std::size_t j = 0; j < m; ++j) step.z[j] = -delta * grad.z[j];
      auto p = try_exp_identity(step);
      if (!p) continue;
      const double b = std::min(c1, qk.censor_point() * std::exp(-p->xi()));
      GroupElement cg = compose_chain({composite, m_inverse(*p, b)}, samples);
      CensoredSrvf cand = warp_srvf(q2, cg);
      const EnergyParts cp = detail::identity_energy_parts(q1, cand, m);
      const double ec = cp.total(cfg.lambda);
      if (std::isfinite(ec) && ec <= ek - cfg.beta * delta * gnorm) {
        next_g = std::move(cg);
        next = std::move(cand);
        next_parts = cp;
        break;
      }
    }
    if (!next) break;
    const double ec = next_parts.total(cfg.lambda);
    if (ec > ek) throw std::logic_error("gradient descent recorded an energy increase");
    composite = std::move(*next_g);
    qk = std::move(*next);
    parts = next_parts;
    ek = ec;
    r.energy_trace.push_back(ek);
    ++k;
    grad = energy_gradient_identity(q1, qk, cfg.lambda, m);
    gnorm = norm(grad);
    converged = gnorm <= cfg.tol_eps;
  }
  r.group_element = std::move(composite);
  r.aligned = std::move(qk);
  r.energy = ek;
  r.dissimilarity = std::sqrt(ek);
  r.matched_energy = parts.matched;
  r.iterations = k;
  r.converged = converged;
  return r;
}

inline MatchResult gradient_descent_align(const CensoredSrvf& q1, const CensoredSrvf& q2,
                                          const ParamPoint& init, const MatchConfig& cfg) {
  const double b = std::min(q1.censor_point(), q2.censor_point() * std::exp(-init.xi()));
  return gradient_descent_align(q1, q2, m_inverse(init, b), cfg);
}

// Grid search over scales followed by gradient refinement; also returns f2 warped by the
// composite group element.
inline MatchResult shape_match(const CensoredFunction& f1, const CensoredFunction& f2,
                               const MatchConfig& cfg) {
  const CensoredSrvf q1 = srvf_from_function(f1);
  const CensoredSrvf q2 = srvf_from_function(f2);
  const MatchResult start = grid_search_align(q1, q2, cfg);
  MatchResult r = gradient_descent_align(q1, q2, start.group_element, cfg);
  r.aligned_function = warp_function(f2, r.group_element);
  return r;
}

}  // namespace epm
