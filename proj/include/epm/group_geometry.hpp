#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "epm/core.hpp"

namespace epm {

namespace detail {

inline double unit_inner(std::span<const double> u, std::span<const double> v) {
  const std::size_t n = u.size();
  double s = 0.5 * (u.front() * v.front() + u.back() * v.back());
  for (std::size_t i = 1; i + 1 < n; ++i) s += u[i] * v[i];
  return s / static_cast<double>(n - 1);
}

inline double unit_mean(std::span<const double> v) { return trapezoid(v, 1.0); }

// gamma(x) = int_0^x psi^2, cumulative trapezoid rescaled so gamma(1) = 1. With refine > 1
// psi is linearly interpolated onto a grid `refine` times finer before squaring.
inline std::vector<double> warp_values_from_psi(std::span<const double> psi,
                                                std::size_t refine = 1) {
  const std::size_t n = (psi.size() - 1) * refine + 1;
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = refine == 1 ? psi[i] : interp_uniform(psi, 1.0, uniform_node(1.0, i, n));
    sq[i] = v * v;
  }
  auto g = cumulative_trapezoid(sq, 1.0);
  const double total = g.back();
  if (!(total > 0.0)) throw invalid_input("psi has zero norm");
  for (double& x : g) x /= total;
  g.back() = 1.0;
  return g;
}

inline void normalize_psi(std::vector<double>& psi, double drift_tol) {
  const double nrm = std::sqrt(unit_inner(psi, psi));
  if (std::abs(nrm - 1.0) > drift_tol)
    for (double& x : psi) x /= nrm;
}

}  // namespace detail

// (xi, psi): log-scale and the SRVF of a unit-interval warp on a uniform grid of [0, 1].
class ParamPoint {
 public:
  ParamPoint(double xi, std::vector<double> psi) : xi_(xi), psi_(std::move(psi)) {
    if (!std::isfinite(xi_)) throw invalid_input("ParamPoint: xi must be finite");
    if (psi_.size() < 2) throw invalid_input("ParamPoint: psi needs >= 2 samples");
    for (std::size_t i = 0; i < psi_.size(); ++i) {
      if (!(psi_[i] >= 0.0) || !std::isfinite(psi_[i]))
        throw orthant_violation("ParamPoint: psi must be nonnegative");
      if (i > 0 && psi_[i] == 0.0 && psi_[i - 1] == 0.0)
        throw invalid_input("ParamPoint: cumulative psi^2 must be strictly increasing");
    }
    if (std::abs(std::sqrt(detail::unit_inner(psi_, psi_)) - 1.0) > 1e-6)
      throw invalid_input("ParamPoint: psi must have unit norm");
  }

  static ParamPoint identity(std::size_t m = 100, double xi = 0.0) {
    return ParamPoint(xi, std::vector<double>(m, 1.0));
  }

  double xi() const noexcept { return xi_; }
  std::span<const double> psi() const noexcept { return psi_; }
  std::size_t size() const noexcept { return psi_.size(); }
  bool is_identity_warp() const noexcept {
    return std::all_of(psi_.begin(), psi_.end(), [](double v) { return v == 1.0; });
  }
  // Samples of gamma = int psi^2 on the same grid.
  std::vector<double> warp_values() const { return detail::warp_values_from_psi(psi_); }

 private:
  double xi_;
  std::vector<double> psi_;
};

// (y, z): tangent vector at the identity; z has zero mean on [0, 1].
struct TangentVector {
  double y = 0.0;
  std::vector<double> z;

  TangentVector() = default;
  TangentVector(double y_, std::vector<double> z_) : y(y_), z(std::move(z_)) {
    if (z.size() < 2) throw invalid_input("TangentVector: z needs >= 2 samples");
    if (std::abs(detail::unit_mean(z)) > 1e-6) throw invalid_input("TangentVector: z must be mean-zero");
  }
};

inline double inner_product(const TangentVector& v1, const TangentVector& v2) {
  if (v1.z.size() != v2.z.size()) throw invalid_input("inner_product: grid mismatch");
  return v1.y * v2.y + detail::unit_inner(v1.z, v2.z);
}

inline double norm(const TangentVector& v) { return std::sqrt(inner_product(v, v)); }

// Returns nullopt when the result would leave the positive orthant.
inline std::optional<ParamPoint> try_exp_identity(const TangentVector& v) {
  const std::size_t m = v.z.size();
  std::vector<double> z = v.z;
  const double mean = detail::unit_mean(z);
  for (double& x : z) x -= mean;
  const double nz = std::sqrt(detail::unit_inner(z, z));
  std::vector<double> psi(m, 1.0);
  if (nz > 1e-300) {
    const double c = std::cos(nz);
    const double s = std::sin(nz) / nz;
    for (std::size_t i = 0; i < m; ++i) {
      psi[i] = c + s * z[i];
      if (psi[i] < 0.0) return std::nullopt;
      if (i > 0 && psi[i] == 0.0 && psi[i - 1] == 0.0) return std::nullopt;
    }
  }
  return ParamPoint(v.y, std::move(psi));
}

// exp(y, z) = (y, cos|z| + sin|z| z/|z|).
inline ParamPoint exp_identity(const TangentVector& v) {
  auto p = try_exp_identity(v);
  if (!p) throw orthant_violation("exp_identity: psi leaves the positive orthant");
  return std::move(*p);
}

// (xi1 + xi2, (psi1 o gamma2) psi2), on the grid of p2.
inline ParamPoint group_compose(const ParamPoint& p1, const ParamPoint& p2) {
  const auto g2 = p2.warp_values();
  const auto psi2 = p2.psi();
  std::vector<double> psi(psi2.size());
  for (std::size_t i = 0; i < psi.size(); ++i)
    psi[i] = detail::interp_uniform(p1.psi(), 1.0, g2[i]) * psi2[i];
  detail::normalize_psi(psi, 1e-9);
  return ParamPoint(p1.xi() + p2.xi(), std::move(psi));
}

// (-xi, sqrt(d/dx gamma^-1)), gamma^-1 obtained by inverting the cumulative integral and
// sqrt(d/dx gamma^-1) = 1 / psi(gamma^-1(x)).
inline ParamPoint group_inverse(const ParamPoint& p) {
  for (double v : p.psi())
    if (!(v > 0.0)) throw non_invertible("group_inverse: psi vanishes at a grid point");
  const std::size_t m = p.size();
  const Warp gamma = Warp::uniform(1.0, p.warp_values());
  std::vector<double> psi(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double x = gamma.inverse(detail::uniform_node(1.0, i, m));
    psi[i] = 1.0 / detail::interp_uniform(p.psi(), 1.0, x);
  }
  detail::normalize_psi(psi, 1e-9);
  return ParamPoint(-p.xi(), std::move(psi));
}

// The warp is built on a 4x refined grid so its slope follows the interpolated psi^2.
inline GroupElement m_inverse(double xi, double pivot, std::span<const double> psi) {
  return GroupElement(std::exp(xi), pivot,
                      Warp::uniform(1.0, detail::warp_values_from_psi(psi, 4)));
}

inline GroupElement m_inverse(const ParamPoint& p, double pivot) {
  return m_inverse(p.xi(), pivot, p.psi());
}

// M(g) = (log a, sqrt(gamma')) with psi sampled on m uniform points; the pivot is g.pivot().
inline ParamPoint m_map(const GroupElement& g, std::size_t m = 100) {
  std::vector<double> psi(m);
  for (std::size_t i = 0; i < m; ++i)
    psi[i] = std::sqrt(std::max(g.unit_warp().derivative(detail::uniform_node(1.0, i, m)), 0.0));
  detail::normalize_psi(psi, 0.0);
  return ParamPoint(std::log(g.scale()), std::move(psi));
}

// Action of M^-1(xi, psi) with pivot b = min(other_censor, c e^-xi):
//   t <= b: q(e^xi b gamma(t/b)) e^{xi/2} psi(t/b)
//   t >  b: q(e^xi t) e^{xi/2}
// Output lives on a uniform grid over [0, c e^-xi] with the input's sample count.
inline CensoredSrvf act(const CensoredSrvf& cq, const ParamPoint& p, double other_censor) {
  if (!(other_censor > 0.0)) throw invalid_input("act: other censor point must be positive");
  const double c = cq.censor_point();
  const double ea = std::exp(p.xi());
  const double root = std::exp(0.5 * p.xi());
  const double c_new = c / ea;
  const double b = std::min(other_censor, c_new);
  const auto gamma = p.warp_values();
  const auto psi = p.psi();
  const std::size_t n = cq.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = detail::uniform_node(c_new, i, n);
    if (t <= b) {
      const double x = std::min(t / b, 1.0);
      const double s = std::min(ea * b * detail::interp_uniform(gamma, 1.0, x), c);
      out[i] = cq(s) * root * detail::interp_uniform(psi, 1.0, x);
    } else {
      out[i] = cq(std::min(ea * t, c)) * root;
    }
  }
  return CensoredSrvf(c_new, std::move(out), cq.initial_value());
}

}  // namespace epm
