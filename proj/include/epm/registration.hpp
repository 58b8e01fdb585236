#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "epm/core.hpp"

namespace epm {

struct Alignment {
  Warp warp;        // fixed-interval warp on [0, b]
  double residual;  // || q1 - (q2 o gamma) sqrt(gamma') || over the search graph
};

// Lattice steps (di, dj) with 1 <= di, dj <= max_slope and gcd 1, ordered by slope dj/di.
inline std::vector<std::pair<int, int>> dp_steps(int max_slope) {
  std::vector<std::pair<int, int>> steps;
  for (int di = 1; di <= max_slope; ++di)
    for (int dj = 1; dj <= max_slope; ++dj)
      if (std::gcd(di, dj) == 1) steps.emplace_back(di, dj);
  std::stable_sort(steps.begin(), steps.end(), [](const auto& x, const auto& y) {
    return x.second * y.first < y.second * x.first;
  });
  return steps;
}

// Trapezoid sum of (q1(t) - q2(gamma(t)) sqrt(slope))^2 over the segment from lattice
// node (k, l) to (i, j); q2 is linearly interpolated at fractional indices.
inline double dp_edge_cost(std::span<const double> q1, std::span<const double> q2, int k, int l,
                           int i, int j, double h) {
  const int di = i - k;
  const int dj = j - l;
  const double rs = std::sqrt(static_cast<double>(dj) / static_cast<double>(di));
  double s = 0.0;
  for (int m = 0; m <= di; ++m) {
    const auto y0 = static_cast<std::size_t>(l + m * dj / di);
    const double w = static_cast<double>(m * dj % di) / static_cast<double>(di);
    const double v = w == 0.0 ? q2[y0] : q2[y0] + w * (q2[y0 + 1] - q2[y0]);
    const double e = q1[static_cast<std::size_t>(k + m)] - v * rs;
    s += (m == 0 || m == di ? 0.5 : 1.0) * e * e;
  }
  return s * h;
}

namespace detail {

// Per-step interpolation table for dp_edge_cost: same arithmetic, precomputed.
struct DpStep {
  int di;
  int dj;
  double rs;
  std::vector<int> offset;
  std::vector<double> frac;
};

inline std::vector<DpStep> dp_step_table(int max_slope) {
  std::vector<DpStep> out;
  for (const auto& [di, dj] : dp_steps(max_slope)) {
    DpStep st{di, dj, std::sqrt(static_cast<double>(dj) / static_cast<double>(di)), {}, {}};
    for (int m = 0; m <= di; ++m) {
      st.offset.push_back(m * dj / di);
      st.frac.push_back(static_cast<double>(m * dj % di) / static_cast<double>(di));
    }
    out.push_back(std::move(st));
  }
  return out;
}

inline double dp_edge_cost(std::span<const double> q1, std::span<const double> q2, int k, int l,
                           const DpStep& st, double h) {
  double s = 0.0;
  for (int m = 0; m <= st.di; ++m) {
    const auto y0 = static_cast<std::size_t>(l + st.offset[static_cast<std::size_t>(m)]);
    const double w = st.frac[static_cast<std::size_t>(m)];
    const double v = w == 0.0 ? q2[y0] : q2[y0] + w * (q2[y0 + 1] - q2[y0]);
    const double e = q1[static_cast<std::size_t>(k + m)] - v * st.rs;
    s += (m == 0 || m == st.di ? 0.5 : 1.0) * e * e;
  }
  return s * h;
}

}  // namespace detail

// Dense elastic registration of q2 to q1 on [0, b] by dynamic programming over the
// uniform sample lattice. Both inputs are samples on the same uniform grid.
inline Alignment dp_elastic_align(std::span<const double> q1, std::span<const double> q2, double b,
                                  int max_slope = 4) {
  if (q1.size() != q2.size()) throw invalid_input("dp_elastic_align: grid mismatch");
  if (q1.size() < 2) throw invalid_input("dp_elastic_align: need >= 2 samples");
  if (!(b > 0.0)) throw invalid_input("dp_elastic_align: b must be positive");
  if (max_slope < 1) throw invalid_input("dp_elastic_align: max_slope must be >= 1");
  const int n = static_cast<int>(q1.size());
  const double h = b / static_cast<double>(n - 1);
  const auto steps = detail::dp_step_table(max_slope);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> cost(static_cast<std::size_t>(n) * n, inf);
  std::vector<int> from(static_cast<std::size_t>(n) * n, -1);
  const auto at = [n](int i, int j) { return static_cast<std::size_t>(i) * n + j; };
  cost[0] = 0.0;
  // Only cells inside the slope cone from (0, 0) and into (n-1, n-1) can lie on a path.
  for (int i = 1; i < n; ++i) {
    const int lo = std::max({1, (i + max_slope - 1) / max_slope, n - 1 - max_slope * (n - 1 - i)});
    const int hi = std::min({n - 1, max_slope * i, n - 1 - (n - 1 - i + max_slope - 1) / max_slope});
    for (int j = lo; j <= hi; ++j) {
      double best = inf;
      int arg = -1;
      for (int s = 0; s < static_cast<int>(steps.size()); ++s) {
        const auto& st = steps[static_cast<std::size_t>(s)];
        const int k = i - st.di;
        const int l = j - st.dj;
        if (k < 0 || l < 0) continue;
        const double base = cost[at(k, l)];
        if (base == inf) continue;
        const double c = base + detail::dp_edge_cost(q1, q2, k, l, st, h);
        if (c < best) {
          best = c;
          arg = s;
        }
      }
      cost[at(i, j)] = best;
      from[at(i, j)] = arg;
    }
  }
  if (cost[at(n - 1, n - 1)] == inf) throw invalid_input("dp_elastic_align: no feasible path");

  std::vector<std::pair<int, int>> path{{n - 1, n - 1}};
  while (path.back().first != 0) {
    const auto [i, j] = path.back();
    const auto& st = steps[static_cast<std::size_t>(from[at(i, j)])];
    path.emplace_back(i - st.di, j - st.dj);
  }
  std::reverse(path.begin(), path.end());
  std::vector<double> g(static_cast<std::size_t>(n));
  for (std::size_t p = 0; p + 1 < path.size(); ++p) {
    const auto [k, l] = path[p];
    const auto [i, j] = path[p + 1];
    const double tl = detail::uniform_node(b, static_cast<std::size_t>(l), q1.size());
    const double tj = detail::uniform_node(b, static_cast<std::size_t>(j), q1.size());
    for (int m = k; m < i; ++m)
      g[static_cast<std::size_t>(m)] = tl + (tj - tl) * static_cast<double>(m - k) / (i - k);
  }
  g.back() = b;
  return {Warp::uniform(b, std::move(g)), std::sqrt(cost[at(n - 1, n - 1)])};
}

inline Alignment dp_elastic_align(const CensoredSrvf& q1, const CensoredSrvf& q2, double b,
                                  int max_slope = 4) {
  const double tol = 1e-12 * b;
  if (std::abs(q1.censor_point() - b) > tol || std::abs(q2.censor_point() - b) > tol)
    throw invalid_input("dp_elastic_align: inputs must be sampled on [0, b]");
  return dp_elastic_align(q1.values(), q2.values(), b, max_slope);
}

// gamma on [0, b], continued as the identity on (b, inf).
inline Warp complete_with_identity(const Warp& gamma) {
  if (gamma.completed()) return gamma;
  const auto t = gamma.times();
  const auto g = gamma.values();
  if (g.back() != t.back()) throw invalid_input("complete_with_identity: gamma(b) != b");
  return Warp({t.begin(), t.end()}, {g.begin(), g.end()}, true);
}

}  // namespace epm
