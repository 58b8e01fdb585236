#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "epm/detail/numeric.hpp"
#include "epm/errors.hpp"

namespace epm {

namespace detail {

// Samples on a uniform grid over [0, c]; the represented function is zero for t > c.
class UniformSeries {
 public:
  UniformSeries(double censor_point, std::vector<double> values, const char* what)
      : censor_(censor_point), values_(std::move(values)) {
    if (!(censor_ > 0.0) || !std::isfinite(censor_))
      throw invalid_input(std::string(what) + ": censor point must be positive and finite");
    if (values_.size() < 3)
      throw invalid_input(std::string(what) + ": at least 3 samples required");
    for (double v : values_)
      if (!std::isfinite(v)) throw invalid_input(std::string(what) + ": non-finite sample");
  }

  double censor_point() const noexcept { return censor_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double spacing() const noexcept { return censor_ / static_cast<double>(values_.size() - 1); }
  double time(std::size_t i) const noexcept { return uniform_node(censor_, i, values_.size()); }
  std::vector<double> times() const { return uniform_grid(censor_, values_.size()); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  // Value at t (left limit at the censor point, zero beyond it).
  double operator()(double t) const noexcept {
    return t > censor_ ? 0.0 : interp_uniform(values_, censor_, t);
  }
  double slope(double t) const noexcept { return slope_uniform(values_, censor_, t); }
  // C1 cubic Hermite evaluation (value and derivative), zero beyond the censor point.
  ValueSlope smooth(double t) const noexcept {
    if (t > censor_) return {0.0, 0.0};
    return hermite_uniform(values_, censor_, t);
  }

 private:
  double censor_;
  std::vector<double> values_;
};

}  // namespace detail

class CensoredFunction : public detail::UniformSeries {
 public:
  CensoredFunction(double censor_point, std::vector<double> values)
      : UniformSeries(censor_point, std::move(values), "CensoredFunction") {}

  // Builds from (time, value) pairs. The first time must be 0 and the censor point
  // is the last time; a non-uniform grid is linearly resampled onto a uniform one.
  static CensoredFunction from_samples(std::span<const double> t, std::span<const double> v) {
    if (t.size() != v.size()) throw invalid_input("time/value length mismatch");
    if (t.size() < 3) throw invalid_input("CensoredFunction: at least 3 samples required");
    const double c = t.back();
    if (!(c > 0.0) || !std::isfinite(c)) throw invalid_input("censor point must be positive");
    if (std::abs(t.front()) > 1e-12 * c) throw invalid_input("first grid time must be 0");
    bool uniform = true;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!std::isfinite(t[i]) || !std::isfinite(v[i])) throw invalid_input("non-finite sample");
      if (i > 0 && !(t[i] > t[i - 1])) throw invalid_input("grid must be strictly increasing");
      if (std::abs(t[i] - detail::uniform_node(c, i, t.size())) > 1e-6 * c) uniform = false;
    }
    if (uniform) return CensoredFunction(c, std::vector<double>(v.begin(), v.end()));
    std::vector<double> out(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double s = detail::uniform_node(c, i, t.size());
      const auto it = std::upper_bound(t.begin(), t.end(), s);
      const std::size_t k = std::min<std::size_t>(
          std::max<std::ptrdiff_t>(it - t.begin(), 1) - 1, t.size() - 2);
      const double w = (s - t[k]) / (t[k + 1] - t[k]);
      out[i] = v[k] + w * (v[k + 1] - v[k]);
    }
    return CensoredFunction(c, std::move(out));
  }
};

class CensoredSrvf : public detail::UniformSeries {
 public:
  CensoredSrvf(double censor_point, std::vector<double> values, double initial_value = 0.0)
      : UniformSeries(censor_point, std::move(values), "CensoredSrvf"), initial_(initial_value) {}

  double initial_value() const noexcept { return initial_; }

 private:
  double initial_;
};

// Piecewise-linear increasing map with gamma(0) = 0. A fixed-interval warp lives on
// [0, b] with gamma(b) = b; a completed warp continues as the identity beyond b.
class Warp {
 public:
  Warp(std::vector<double> times, std::vector<double> values, bool completed = false)
      : t_(std::move(times)), g_(std::move(values)), completed_(completed) {
    if (t_.size() != g_.size() || t_.size() < 2) throw invalid_input("Warp: need >= 2 samples");
    if (t_.front() != 0.0 || g_.front() != 0.0) throw invalid_input("Warp: gamma(0) must be 0");
    for (std::size_t i = 1; i < t_.size(); ++i) {
      if (!std::isfinite(t_[i]) || !std::isfinite(g_[i])) throw invalid_input("Warp: non-finite");
      if (!(t_[i] > t_[i - 1]) || !(g_[i] > g_[i - 1]))
        throw invalid_input("Warp: samples must be strictly increasing");
    }
    const double b = t_.back();
    if (std::abs(g_.back() - b) > 1e-9 * b)
      throw invalid_input("Warp: gamma(b) must equal b");
    g_.back() = b;
  }

  static Warp identity(double interval_end, std::size_t n = 2) {
    auto t = detail::uniform_grid(interval_end, n);
    return Warp(t, t);
  }
  static Warp uniform(double interval_end, std::vector<double> values, bool completed = false) {
    auto t = detail::uniform_grid(interval_end, values.size());
    return Warp(std::move(t), std::move(values), completed);
  }

  double pivot() const noexcept { return t_.back(); }
  double interval_end() const noexcept {
    return completed_ ? std::numeric_limits<double>::infinity() : t_.back();
  }
  bool completed() const noexcept { return completed_; }
  std::size_t size() const noexcept { return t_.size(); }
  std::span<const double> times() const noexcept { return t_; }
  std::span<const double> values() const noexcept { return g_; }

  // Beyond the pivot a completed warp is the identity; a fixed-interval one is clamped.
  double operator()(double t) const noexcept {
    if (t >= t_.back()) return completed_ ? t : g_.back();
    if (t <= 0.0) return 0.0;
    const std::size_t i = cell(t_, t);
    const double w = (t - t_[i]) / (t_[i + 1] - t_[i]);
    return g_[i] + w * (g_[i + 1] - g_[i]);
  }

  // In-place evaluation on a nondecreasing sequence, walking the cells once.
  void apply_sorted(std::span<double> xs) const noexcept {
    std::size_t i = 0;
    const std::size_t last = t_.size() - 2;
    for (double& x : xs) {
      if (x >= t_.back()) {
        x = completed_ ? x : g_.back();
        continue;
      }
      if (x <= 0.0) {
        x = 0.0;
        continue;
      }
      while (i < last && t_[i + 1] <= x) ++i;
      const double w = (x - t_[i]) / (t_[i + 1] - t_[i]);
      x = g_[i] + w * (g_[i + 1] - g_[i]);
    }
  }

  double inverse(double y) const noexcept {
    if (y >= g_.back()) return completed_ ? y : t_.back();
    if (y <= 0.0) return 0.0;
    const std::size_t i = cell(g_, y);
    const double w = (y - g_[i]) / (g_[i + 1] - g_[i]);
    return t_[i] + w * (t_[i + 1] - t_[i]);
  }

  // Slope of the interpolant; adjacent slopes are averaged at interior knots.
  double derivative(double t) const noexcept {
    const std::size_t n = t_.size();
    if (t > t_.back()) return completed_ ? 1.0 : slope(n - 2);
    if (t <= 0.0) return slope(0);
    const std::size_t i = cell(t_, t);
    const double tol = 1e-12 * t_.back();
    if (i > 0 && t - t_[i] <= tol) return 0.5 * (slope(i - 1) + slope(i));
    if (i + 2 < n && t_[i + 1] - t <= tol) return 0.5 * (slope(i) + slope(i + 1));
    return slope(i);
  }

  // Exact inverse of the interpolant: swap the coordinates.
  Warp inverted() const { return Warp(g_, t_, completed_); }

 private:
  static std::size_t cell(const std::vector<double>& k, double x) noexcept {
    const auto it = std::upper_bound(k.begin(), k.end(), x);
    const auto i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - k.begin(), 1) - 1);
    return std::min(i, k.size() - 2);
  }
  double slope(std::size_t i) const noexcept {
    return (g_[i + 1] - g_[i]) / (t_[i + 1] - t_[i]);
  }

  std::vector<double> t_;
  std::vector<double> g_;
  bool completed_;
};

// g(t) = a*b*gamma(t/b) for t <= b and a*t beyond, with gamma a warp of [0, 1].
class GroupElement {
 public:
  GroupElement(double scale, double pivot, Warp unit_warp)
      : a_(scale), b_(pivot), gamma_(std::move(unit_warp)) {
    if (!(a_ > 0.0) || !std::isfinite(a_)) throw invalid_input("GroupElement: scale must be > 0");
    if (!(b_ > 0.0) || !std::isfinite(b_)) throw invalid_input("GroupElement: pivot must be > 0");
    if (gamma_.completed() || std::abs(gamma_.pivot() - 1.0) > 1e-12)
      throw invalid_input("GroupElement: unit warp must live on [0, 1]");
  }

  static GroupElement identity(double pivot = 1.0) {
    return GroupElement(1.0, pivot, Warp::identity(1.0));
  }
  static GroupElement scaling(double a, double pivot = 1.0) {
    return GroupElement(a, pivot, Warp::identity(1.0));
  }

  double scale() const noexcept { return a_; }
  double pivot() const noexcept { return b_; }
  const Warp& unit_warp() const noexcept { return gamma_; }

  double operator()(double t) const noexcept {
    return t <= b_ ? a_ * b_ * gamma_(t / b_) : a_ * t;
  }
  // In-place evaluation on a nondecreasing sequence.
  void apply_sorted(std::span<double> ts) const {
    const auto split = static_cast<std::size_t>(
        std::upper_bound(ts.begin(), ts.end(), b_) - ts.begin());
    const auto head = ts.first(split);
    for (double& t : head) t /= b_;
    gamma_.apply_sorted(head);
    for (double& t : head) t *= a_ * b_;
    for (double& t : ts.subspan(split)) t *= a_;
  }
  // Left derivative at the pivot.
  double derivative(double t) const noexcept {
    return t <= b_ ? a_ * gamma_.derivative(std::min(t / b_, 1.0)) : a_;
  }
  double inverse_at(double y) const noexcept {
    const double ab = a_ * b_;
    return y <= ab ? b_ * gamma_.inverse(y / ab) : y / a_;
  }

  // (n, h)^-1 = (phi_{h^-1}(n^-1), h^-1); in normal form (1/a, a*b, gamma^-1).
  GroupElement inverse() const { return GroupElement(1.0 / a_, a_ * b_, gamma_.inverted()); }

  // Resample the unit warp onto max_knots uniform points once it carries more than
  // twice that many knots (repeated composition grows the knot set).
  GroupElement simplified(std::size_t max_knots) const {
    if (gamma_.size() <= 2 * max_knots) return *this;
    std::vector<double> v(max_knots);
    for (std::size_t i = 0; i < max_knots; ++i) v[i] = gamma_(detail::uniform_node(1.0, i, max_knots));
    v.back() = 1.0;
    return GroupElement(a_, b_, Warp::uniform(1.0, std::move(v)));
  }

 private:
  double a_;
  double b_;
  Warp gamma_;
};

namespace detail {

// Element of the warping subgroup N: s -> beta*gamma(s/beta) below the pivot beta, s beyond.
struct PivotedWarp {
  double beta;
  const Warp* gamma;
  double operator()(double s) const { return s <= beta ? beta * (*gamma)(s / beta) : s; }
  double inverse(double y) const { return y <= beta ? beta * gamma->inverse(y / beta) : y; }
};

}  // namespace detail

// outer o inner, computed through the semidirect product
// (n1, h1)(n2, h2) = (n1 o phi_{h1}(n2), h1 h2) with phi_h(n)(s) = a*n(s/a).
inline GroupElement compose(const GroupElement& outer, const GroupElement& inner) {
  const double a1 = outer.scale();
  const double a2 = inner.scale();
  const detail::PivotedWarp n1{a1 * outer.pivot(), &outer.unit_warp()};
  const detail::PivotedWarp n2{a2 * inner.pivot(), &inner.unit_warp()};
  // phi_{h1}(n2) has pivot a1*beta2 and the same unit warp.
  const double beta_phi = a1 * n2.beta;
  const auto phi = [&](double s) { return a1 * n2(s / a1); };
  const auto phi_inv = [&](double y) { return a1 * n2.inverse(y / a1); };
  const double beta = std::max(n1.beta, beta_phi);

  std::vector<double> x;
  x.reserve(inner.unit_warp().size() + outer.unit_warp().size() + 1);
  for (double u : inner.unit_warp().times()) x.push_back(beta_phi * u / beta);
  for (double v : outer.unit_warp().times()) x.push_back(phi_inv(n1.beta * v) / beta);
  x.push_back(1.0);
  for (double& xi : x) xi = std::clamp(xi, 0.0, 1.0);
  x = detail::merge_knots(std::move(x), 1.0);
  x.front() = 0.0;
  x.back() = 1.0;

  std::vector<double> t;
  std::vector<double> g;
  t.reserve(x.size());
  g.reserve(x.size());
  for (double xi : x) {
    const double y = xi == 1.0 ? 1.0 : n1(phi(beta * xi)) / beta;
    if (!t.empty() && !(y > g.back())) continue;
    t.push_back(xi);
    g.push_back(y);
  }
  if (t.back() != 1.0) {
    t.back() = 1.0;
    g.back() = 1.0;
  }
  // Normal form of n o h with h(t) = a1*a2*t: pivot beta/(a1*a2).
  const double a = a1 * a2;
  return GroupElement(a, beta / a, Warp(std::move(t), std::move(g)));
}

// chain[0] o chain[1] o ... o chain[k], with the unit warp sampled on `samples` uniform
// points (the pivot follows the composition rule b = max(b_inner, b_outer / a_inner)).
inline GroupElement compose_chain(const std::vector<GroupElement>& chain, std::size_t samples) {
  if (chain.empty()) throw invalid_input("compose_chain: empty chain");
  if (samples < 2) throw invalid_input("compose_chain: need >= 2 samples");
  if (chain.size() == 1) return chain.front();
  double a = chain.front().scale();
  double b = chain.front().pivot();
  for (std::size_t k = 1; k < chain.size(); ++k) {
    b = std::max(chain[k].pivot(), b / chain[k].scale());
    a *= chain[k].scale();
  }
  std::vector<double> g(samples);
  for (std::size_t i = 0; i < samples; ++i) g[i] = b * detail::uniform_node(1.0, i, samples);
  for (std::size_t k = chain.size(); k-- > 0;) chain[k].apply_sorted(g);
  for (double& v : g) v /= a * b;
  g.front() = 0.0;
  g.back() = 1.0;
  for (std::size_t i = 1; i + 1 < samples; ++i)
    g[i] = std::clamp(g[i], std::nextafter(g[i - 1], 2.0), 1.0);
  return GroupElement(a, b, Warp::uniform(1.0, std::move(g)));
}

// q(t) = sign(f'(t)) sqrt(|f'(t)|), derivative by second-order finite differences.
inline CensoredSrvf srvf_from_function(const CensoredFunction& f) {
  const auto d = detail::gradient_uniform(f.values(), f.spacing());
  std::vector<double> q(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double s = d[i] > 0.0 ? 1.0 : (d[i] < 0.0 ? -1.0 : 0.0);
    q[i] = s * std::sqrt(std::abs(d[i]));
  }
  return CensoredSrvf(f.censor_point(), std::move(q), f.values()[0]);
}

// Reconstructs f from q|q| by inverting the difference stencil used in
// srvf_from_function exactly: f1 from the two leftmost stencils, then
// f(i+1) = f(i-1) + 2h d(i).
inline CensoredFunction function_from_srvf(const CensoredSrvf& q) {
  const std::size_t n = q.size();
  const double h = q.spacing();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = q[i] * std::abs(q[i]);
  std::vector<double> f(n);
  f[0] = q.initial_value();
  f[1] = f[0] + 0.5 * h * (d[0] + d[1]);
  for (std::size_t i = 1; i + 1 < n; ++i) f[i + 1] = f[i - 1] + 2.0 * h * d[i];
  return CensoredFunction(q.censor_point(), std::move(f));
}

inline double squared_norm(const CensoredSrvf& q) {
  return detail::integral_square(q.values(), q.censor_point(), 0.0, q.censor_point());
}
inline double norm(const CensoredSrvf& q) { return std::sqrt(squared_norm(q)); }

// L2 distance of the piecewise-linear representatives, integrated exactly segment by
// segment over the union of both grids so the jumps at the censor points are resolved.
inline double preshape_distance(const CensoredSrvf& q1, const CensoredSrvf& q2) {
  const double c1 = q1.censor_point();
  const double c2 = q2.censor_point();
  const double end = std::max(c1, c2);
  auto knots = q1.times();
  const auto t2 = q2.times();
  knots.insert(knots.end(), t2.begin(), t2.end());
  knots = detail::merge_knots(std::move(knots), end);
  const auto side = [](const CensoredSrvf& q, double mid, double t) {
    return mid < q.censor_point() ? detail::interp_uniform(q.values(), q.censor_point(), t) : 0.0;
  };
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    const double u = knots[k];
    const double v = knots[k + 1];
    const double mid = 0.5 * (u + v);
    const double du = side(q1, mid, u) - side(q2, mid, u);
    const double dv = side(q1, mid, v) - side(q2, mid, v);
    s += detail::segment_square(du, dv, v - u);
  }
  return std::sqrt(s);
}

// (c, q) * g = (g^-1(c), (q o g) sqrt(g')), resampled on the same number of points.
// g' is taken as the secant slope over the cell [t - h/2, t + h/2] around each node, so
// warps with many more knots than output samples keep the norm.
inline CensoredSrvf warp_srvf(const CensoredSrvf& q, const GroupElement& g) {
  const double c = q.censor_point();
  const double c_new = g.inverse_at(c);
  if (!(c_new > 0.0) || !std::isfinite(c_new)) throw invalid_input("warp_srvf: degenerate warp");
  const std::size_t n = q.size();
  const double h = c_new / static_cast<double>(n - 1);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = detail::uniform_node(c_new, i, n);
    const double s = std::min(g(t), c);
    const double lo = std::max(t - 0.5 * h, 0.0);
    const double hi = std::min(t + 0.5 * h, c_new);
    const double dg = (std::min(g(hi), c) - std::min(g(lo), c)) / (hi - lo);
    if (!(dg >= 0.0)) throw invalid_input("warp_srvf: non-invertible warp");
    out[i] = q(s) * std::sqrt(dg);
  }
  return CensoredSrvf(c_new, std::move(out), q.initial_value());
}

// (c, f) o g = (g^-1(c), f o g).
inline CensoredFunction warp_function(const CensoredFunction& f, const GroupElement& g) {
  const double c = f.censor_point();
  const double c_new = g.inverse_at(c);
  if (!(c_new > 0.0) || !std::isfinite(c_new))
    throw invalid_input("warp_function: degenerate warp");
  const std::size_t n = f.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(std::min(g(detail::uniform_node(c_new, i, n)), c));
  return CensoredFunction(c_new, std::move(out));
}

// Samples f at n uniform points of [0, c] (n defaults to f.size()).
inline CensoredFunction resample(const CensoredFunction& f, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = f(detail::uniform_node(f.censor_point(), i, n));
  return CensoredFunction(f.censor_point(), std::move(v));
}

// Linear rescaling of the domain onto [0, end], resampled to n points.
inline CensoredFunction rescale_domain(const CensoredFunction& f, double end, std::size_t n) {
  std::vector<double> v(n);
  const double c = f.censor_point();
  for (std::size_t i = 0; i < n; ++i) v[i] = f(std::min(c * detail::uniform_node(1.0, i, n), c));
  return CensoredFunction(end, std::move(v));
}

}  // namespace epm
