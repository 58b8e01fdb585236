#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include "epm/core.hpp"
#include "epm/group_geometry.hpp"

namespace epm {

struct LabeledDataset {
  std::vector<std::string> ids;
  std::vector<CensoredFunction> functions;
  std::optional<std::vector<int>> labels;

  std::size_t size() const noexcept { return functions.size(); }

  void validate() const {
    if (ids.size() != functions.size()) throw invalid_input("dataset: ids/functions length mismatch");
    if (labels && labels->size() != functions.size())
      throw invalid_input("dataset: labels/functions length mismatch");
    std::set<std::string> seen(ids.begin(), ids.end());
    if (seen.size() != ids.size()) throw invalid_input("dataset: duplicate ids");
  }
};

struct SimConfig {
  std::size_t n_per_class = 17;
  std::size_t n_samples = 156;
  std::array<double, 2> mixture_means{0.3, 0.7};
  double mixture_sigma = 0.07;
  std::vector<std::array<double, 2>> class_coeffs{{0.2, 0.8}, {0.5, 0.5}, {0.8, 0.2}};
  double trunc_lo = 0.7;
  double trunc_hi = 1.0;
  double scale_lo = 0.9;
  double scale_hi = 1.1;
  double warp_roughness = 0.3;
  // Floor on the warp SRVF; the tangent vector is halved until psi stays above it.
  double warp_min_psi = 0.05;
  std::size_t warp_samples = 100;
  std::size_t internal_grid = 500;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_per_class < 1) throw invalid_input("n_per_class must be >= 1");
    if (n_samples < 3 || internal_grid < 3 || warp_samples < 3)
      throw invalid_input("grids need >= 3 samples");
    if (!(mixture_sigma > 0.0)) throw invalid_input("mixture_sigma must be > 0");
    if (class_coeffs.empty()) throw invalid_input("need at least one class");
    for (const auto& c : class_coeffs)
      if (std::abs(c[0] + c[1] - 1.0) > 1e-12 || c[0] < 0.0 || c[1] < 0.0)
        throw invalid_input("class coefficients must be nonnegative and sum to 1");
    if (!(trunc_lo > 0.0) || trunc_hi > 1.0 || trunc_lo > trunc_hi)
      throw invalid_input("truncation bounds must satisfy 0 < lo <= hi <= 1");
    if (!(scale_lo > 0.0) || scale_lo > scale_hi) throw invalid_input("bad scale bounds");
    if (!(warp_roughness >= 0.0)) throw invalid_input("warp_roughness must be >= 0");
    if (!(warp_min_psi >= 0.0 && warp_min_psi < 1.0))
      throw invalid_input("warp_min_psi must lie in [0, 1)");
  }
};

// Random warp of [0, interval_end]: a zero-mean tangent vector built from the first four
// Fourier harmonics (coefficients ~ N(0, roughness^2)) is mapped through exp_identity and
// its square integrated. The tangent vector is halved until psi stays above min_psi.
template <class Rng>
Warp random_warp(double interval_end, double roughness, Rng& rng, std::size_t n = 100,
                 double min_psi = 0.05) {
  if (!(interval_end > 0.0)) throw invalid_input("random_warp: interval_end must be > 0");
  if (!(roughness >= 0.0)) throw invalid_input("random_warp: roughness must be >= 0");
  if (n < 3) throw invalid_input("random_warp: need >= 3 samples");
  if (roughness == 0.0) return Warp::identity(interval_end, n);
  std::normal_distribution<double> normal(0.0, roughness);
  std::array<double, 8> coef{};
  for (double& c : coef) c = normal(rng);
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = detail::uniform_node(1.0, i, n);
    double v = 0.0;
    for (int k = 1; k <= 4; ++k) {
      const double w = 2.0 * std::numbers::pi * k * x;
      v += coef[2 * (k - 1)] * std::sin(w) + coef[2 * k - 1] * std::cos(w);
    }
    z[i] = v;
  }
  const double mean = detail::unit_mean(z);
  for (double& v : z) v -= mean;
  for (int attempt = 0; attempt < 64; ++attempt) {
    if (auto p = try_exp_identity(TangentVector(0.0, z))) {
      const auto psi = p->psi();
      if (*std::min_element(psi.begin(), psi.end()) >= min_psi) {
        auto g = p->warp_values();
        for (double& v : g) v *= interval_end;
        g.back() = interval_end;
        return Warp::uniform(interval_end, std::move(g));
      }
    }
    for (double& v : z) v *= 0.5;
  }
  return Warp::identity(interval_end, n);
}

namespace detail {

inline double gaussian_pdf(double x, double mu, double sigma) {
  const double u = (x - mu) / sigma;
  return std::exp(-0.5 * u * u) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace detail

// Two-component Gaussian mixture on [0, 1] for class k, sampled on the internal grid.
inline CensoredFunction simulated_template(const SimConfig& cfg, std::size_t k) {
  std::vector<double> v(cfg.internal_grid);
  const auto& c = cfg.class_coeffs.at(k);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double t = detail::uniform_node(1.0, i, v.size());
    v[i] = c[0] * detail::gaussian_pdf(t, cfg.mixture_means[0], cfg.mixture_sigma) +
           c[1] * detail::gaussian_pdf(t, cfg.mixture_means[1], cfg.mixture_sigma);
  }
  return CensoredFunction(1.0, std::move(v));
}

// Each function: mixture -> truncate at b ~ U[trunc] -> compose with t -> a t,
// a ~ U[scale] -> random warp of [0, b/a]; sampled on n_samples points of [0, b/a].
inline LabeledDataset generate_simulated(const SimConfig& cfg) {
  cfg.validate();
  LabeledDataset ds;
  ds.labels.emplace();
  const auto lo = static_cast<std::uint32_t>(cfg.seed & 0xffffffffu);
  const auto hi = static_cast<std::uint32_t>(cfg.seed >> 32);
  for (std::size_t k = 0; k < cfg.class_coeffs.size(); ++k) {
    const CensoredFunction mix = simulated_template(cfg, k);
    for (std::size_t j = 0; j < cfg.n_per_class; ++j) {
      const std::size_t index = k * cfg.n_per_class + j;
      std::seed_seq seq{lo, hi, static_cast<std::uint32_t>(index)};
      std::mt19937_64 rng(seq);
      std::uniform_real_distribution<double> ub(cfg.trunc_lo, cfg.trunc_hi);
      std::uniform_real_distribution<double> ua(cfg.scale_lo, cfg.scale_hi);
      const double b = cfg.trunc_lo == cfg.trunc_hi ? cfg.trunc_lo : ub(rng);
      const double a = cfg.scale_lo == cfg.scale_hi ? cfg.scale_lo : ua(rng);
      const double c = b / a;
      const Warp gamma = random_warp(c, cfg.warp_roughness, rng, cfg.warp_samples, cfg.warp_min_psi);
      std::vector<double> v(cfg.n_samples);
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double t = detail::uniform_node(c, i, v.size());
        v[i] = mix(std::min(a * gamma(t), b));
      }
      ds.functions.emplace_back(c, std::move(v));
      char id[32];
      std::snprintf(id, sizeof id, "class%zu_%02zu", k + 1, j + 1);
      ds.ids.emplace_back(id);
      ds.labels->push_back(static_cast<int>(k));
    }
  }
  return ds;
}

struct DailyCount {
  std::chrono::sys_days date;
  double count;
};

// Parses YYYY-MM-DD.
inline std::chrono::sys_days parse_iso_date(std::string_view s) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  const auto bad = [&] { return invalid_input("unparseable date: '" + std::string(s) + "'"); };
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') throw bad();
  const auto num = [&](std::size_t pos, std::size_t len, auto& out) {
    const auto r = std::from_chars(s.data() + pos, s.data() + pos + len, out);
    if (r.ec != std::errc{} || r.ptr != s.data() + pos + len) throw bad();
  };
  num(0, 4, y);
  num(5, 2, m);
  num(8, 2, d);
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) throw bad();
  return std::chrono::sys_days{ymd};
}

inline std::string format_iso_date(std::chrono::sys_days day) {
  const std::chrono::year_month_day ymd{day};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

// Centered moving average whose window shrinks symmetrically near the ends.
inline std::vector<double> centered_moving_average(const std::vector<double>& y, std::size_t width) {
  const std::size_t half = width / 2;
  const std::size_t n = y.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = std::min({half, i, n - 1 - i});
    double s = 0.0;
    for (std::size_t k = i - r; k <= i + r; ++k) s += y[k];
    out[i] = s / static_cast<double>(2 * r + 1);
  }
  return out;
}

// Daily counts -> rate curve: origin at the first nonzero day, 7-day moving average,
// cubic spline resampled to n_out points over [0, L] (L = days to truncate), negative
// overshoot clipped, trapezoid integral scaled to 1. Missing days count as zero.
inline CensoredFunction preprocess_rate_series(std::vector<DailyCount> raw,
                                               std::chrono::sys_days truncate,
                                               std::size_t n_out = 100) {
  if (raw.empty()) throw invalid_input("preprocess: empty series");
  if (n_out < 3) throw invalid_input("preprocess: need >= 3 output samples");
  std::sort(raw.begin(), raw.end(), [](const auto& x, const auto& y) { return x.date < y.date; });
  for (std::size_t i = 1; i < raw.size(); ++i)
    if (raw[i].date == raw[i - 1].date) throw invalid_input("preprocess: duplicate date");
  for (const auto& r : raw)
    if (!std::isfinite(r.count) || r.count < 0.0) throw invalid_input("preprocess: bad count");
  const auto first = std::find_if(raw.begin(), raw.end(), [&](const auto& r) {
    return r.count > 0.0 && r.date <= truncate;
  });
  if (first == raw.end()) throw invalid_input("preprocess: no case before the truncation date");
  if (raw.back().date < truncate) throw invalid_input("preprocess: series ends before truncation date");
  const auto origin = first->date;
  const auto days = (truncate - origin).count();
  if (days < 2) throw invalid_input("preprocess: fewer than 3 days between first case and truncation");
  std::vector<double> y(static_cast<std::size_t>(days) + 1, 0.0);
  for (auto it = first; it != raw.end() && it->date <= truncate; ++it)
    y[static_cast<std::size_t>((it->date - origin).count())] = it->count;
  const auto smooth = centered_moving_average(y, 7);
  const double length = static_cast<double>(days);
  std::vector<double> v(n_out);
  if (smooth.size() >= 5) {
    const boost::math::interpolators::cardinal_cubic_b_spline<double> spline(
        smooth.data(), smooth.size(), 0.0, 1.0);
    for (std::size_t i = 0; i < n_out; ++i) v[i] = spline(detail::uniform_node(length, i, n_out));
  } else {
    for (std::size_t i = 0; i < n_out; ++i)
      v[i] = detail::interp_uniform(smooth, length, detail::uniform_node(length, i, n_out));
  }
  for (double& x : v) x = std::max(x, 0.0);
  const double total = detail::trapezoid(v, length);
  if (!(total > 0.0)) throw invalid_input("preprocess: series integrates to zero");
  for (double& x : v) x /= total;
  return CensoredFunction(length, std::move(v));
}

}  // namespace epm
