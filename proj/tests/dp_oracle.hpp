#pragma once

#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "epm/registration.hpp"

namespace epm::test {

// Minimum path cost over every monotone lattice path from (0, 0) to (n-1, n-1) built from
// dp_steps(max_slope), enumerated depth-first. Costs are summed from the start in path
// order, the same order the DP uses.
inline double exhaustive_min_cost(std::span<const double> q1, std::span<const double> q2, double b,
                                  int max_slope, std::size_t* paths = nullptr) {
  const int n = static_cast<int>(q1.size());
  const double h = b / static_cast<double>(n - 1);
  const auto steps = dp_steps(max_slope);
  double best = std::numeric_limits<double>::infinity();
  std::size_t count = 0;
  std::vector<std::pair<int, int>> stack_nodes;
  const auto visit = [&](auto&& self, int i, int j, double acc) -> void {
    if (i == n - 1 && j == n - 1) {
      ++count;
      if (acc < best) best = acc;
      return;
    }
    for (const auto& [di, dj] : steps) {
      const int k = i + di;
      const int l = j + dj;
      if (k > n - 1 || l > n - 1) continue;
      self(self, k, l, acc + dp_edge_cost(q1, q2, i, j, k, l, h));
    }
  };
  visit(visit, 0, 0, 0.0);
  if (paths) *paths = count;
  return best;
}

}  // namespace epm::test
