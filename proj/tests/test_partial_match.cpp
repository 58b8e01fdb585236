#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "epm/partial_match.hpp"
#include "support.hpp"

using namespace epm;
using Catch::Approx;

namespace {

MatchConfig fast_config() {
  MatchConfig cfg;
  cfg.dp_samples = 60;
  return cfg;
}

double grid_cell(const MatchConfig& cfg) {
  return std::log(cfg.scale_hi / cfg.scale_lo) / (cfg.grid_size - 1);
}

// Central difference of the energy along exp_identity(eps * v).
double directional_fd(const CensoredSrvf& q1, const CensoredSrvf& q2, double lambda,
                      const TangentVector& v, double h) {
  TangentVector plus = v;
  TangentVector minus = v;
  plus.y *= h;
  minus.y *= -h;
  for (double& x : plus.z) x *= h;
  for (double& x : minus.z) x *= -h;
  return (energy(exp_identity(plus), q1, q2, lambda) - energy(exp_identity(minus), q1, q2, lambda)) /
         (2.0 * h);
}

bool non_increasing(const std::vector<double>& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i)
    if (trace[i] > trace[i - 1]) return false;
  return true;
}

}  // namespace

TEST_CASE("energy examples", "[energy]") {
  test::Rng rng(41);
  const auto q1 = test::smooth_srvf(rng, 0.9, 120);
  const auto q2 = test::smooth_srvf(rng, 1.1, 120);
  const auto id = ParamPoint::identity();
  for (double lambda : {0.25, 1.0, 3.0})
    CHECK(energy(id, q1, q1, lambda) == Approx(0.0).margin(1e-24));
  const double d = preshape_distance(q1, q2);
  CHECK(energy(id, q1, q2, 1.0) == Approx(d * d).epsilon(1e-3));

  const CensoredSrvf one2(2.0, std::vector<double>(101, 1.0));
  const CensoredSrvf one1(1.0, std::vector<double>(101, 1.0));
  CHECK(energy(id, one2, one1, 0.25) == Approx(0.25).epsilon(1e-12));
  const auto parts = energy_parts(id, one2, one1);
  CHECK(parts.pivot == 1.0);
  CHECK(parts.matched == Approx(0.0).margin(1e-15));
  CHECK(parts.tail == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("energy at lambda = 1 matches the preshape distance after the action", "[energy]") {
  test::Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const auto q1 = test::smooth_srvf(rng, test::uniform(rng, 0.6, 1.2), 400);
    const auto q2 = test::smooth_srvf(rng, test::uniform(rng, 0.6, 1.2), 400);
    const auto p = test::random_param_point(rng, 100, 0.2, 0.1);
    const auto moved = act(q2, p, q1.censor_point());
    const double d = preshape_distance(q1, moved);
    CHECK(energy(p, q1, q2, 1.0) == Approx(d * d).epsilon(2e-2));
  }
}

TEST_CASE("gradient vanishes for identical inputs", "[gradient]") {
  test::Rng rng(43);
  const auto q = test::smooth_srvf(rng, 0.8, 150);
  const auto g = energy_gradient_identity(q, q, 0.25, 100);
  CHECK(g.y == 0.0);
  for (double v : g.z) CHECK(v == 0.0);
}

TEST_CASE("gradient matches finite differences of the energy", "[gradient][oracle]") {
  test::Rng rng(44);
  const double h = 1e-5;
  for (int trial = 0; trial < 50; ++trial) {
    const double c1 = test::uniform(rng, 0.6, 1.2);
    double c2 = test::uniform(rng, 0.6, 1.2);
    if (std::abs(c1 - c2) < 1e-3) c2 += 2e-3;
    const auto q1 = test::smooth_srvf(rng, c1, 100);
    const auto q2 = test::smooth_srvf(rng, c2, 100);
    const double lambda = trial % 2 ? 0.25 : 1.0;
    const auto g = energy_gradient_identity(q1, q2, lambda, 100);
    CHECK(std::abs(detail::unit_mean(g.z)) < 1e-9);

    const TangentVector ey(1.0, std::vector<double>(100, 0.0));
    const double fy = directional_fd(q1, q2, lambda, ey, h);
    CHECK(std::abs(fy - g.y) <= 1e-3 * std::abs(g.y));

    const double nz = std::sqrt(detail::unit_inner(g.z, g.z));
    TangentVector ez(0.0, g.z);
    for (double& x : ez.z) x /= nz;
    const double fz = directional_fd(q1, q2, lambda, ez, h);
    CHECK(std::abs(fz - nz) <= 1e-3 * nz);

    // A random direction, error measured against |z|.
    const auto u = test::random_tangent(rng, 100, 0.0, 1.0);
    const double fu = directional_fd(q1, q2, lambda, u, h);
    CHECK(std::abs(fu - detail::unit_inner(g.z, u.z)) <= 1e-3 * nz);
  }
}

TEST_CASE("grid search examples", "[grid]") {
  const MatchConfig cfg = fast_config();
  test::Rng rng(45);
  const auto q1 = srvf_from_function(test::random_function(rng, 1.0, 156));

  const auto self = grid_search_align(q1, q1, cfg);
  CHECK(std::abs(std::log(self.scale())) <= grid_cell(cfg));
  CHECK(self.energy < 1e-2 * squared_norm(q1));

  const double a0 = 1.5;
  const auto q2 = warp_srvf(q1, GroupElement::scaling(1.0 / a0, 10.0));
  const auto r = grid_search_align(q1, q2, cfg);
  CHECK(std::abs(std::log(r.scale() / a0)) <= grid_cell(cfg));
  CHECK(r.energy < 0.05 * squared_norm(q1));

  MatchConfig one = cfg;
  one.grid_size = 1;
  one.scale_lo = one.scale_hi = 1.0;
  const auto q3 = srvf_from_function(test::random_function(rng, 0.8, 156));
  const auto f = grid_search_align(q1, q3, one);
  CHECK(f.scale() == 1.0);
  CHECK(f.group_element.pivot() == 0.8);
  const auto check = detail::identity_energy_parts(q1, warp_srvf(q3, f.group_element), 156);
  CHECK(f.energy == Approx(check.total(cfg.lambda)).epsilon(1e-12));
}

TEST_CASE("grid search result is no worse than any grid point", "[grid][property]") {
  MatchConfig cfg = fast_config();
  cfg.grid_size = 7;
  test::Rng rng(46);
  for (int trial = 0; trial < 10; ++trial) {
    const auto q1 = srvf_from_function(test::random_function(rng, test::uniform(rng, 0.6, 1.1), 100));
    const auto q2 = srvf_from_function(test::random_function(rng, test::uniform(rng, 0.6, 1.1), 100));
    const auto best = grid_search_align(q1, q2, cfg);
    for (double a : cfg.scales()) {
      MatchConfig single = cfg;
      single.grid_size = 1;
      single.scale_lo = single.scale_hi = a;
      CHECK(best.energy <= grid_search_align(q1, q2, single).energy);
    }
  }
}

TEST_CASE("gradient descent examples", "[descent]") {
  const MatchConfig cfg = fast_config();
  test::Rng rng(47);
  const auto q = srvf_from_function(test::random_function(rng, 0.9, 120));
  const auto r = gradient_descent_align(q, q, ParamPoint::identity(), cfg);
  CHECK(r.iterations == 0);
  CHECK(r.converged);
  CHECK(r.energy == Approx(0.0).margin(1e-24));
  CHECK(r.energy_trace.size() == 1);
}

TEST_CASE("gradient descent never increases the energy", "[descent][property]") {
  const MatchConfig cfg = fast_config();
  test::Rng rng(48);
  for (int trial = 0; trial < 15; ++trial) {
    const auto f1 = test::random_function(rng, test::uniform(rng, 0.6, 1.1), 120);
    const auto g = test::random_group_element(rng, 0.8, 1.25, 0.5, 1.0);
    const auto f2 = warp_function(test::random_function(rng, f1.censor_point(), 120), g);
    const auto q1 = srvf_from_function(f1);
    const auto q2 = srvf_from_function(f2);
    const auto start = grid_search_align(q1, q2, cfg);
    const auto r = gradient_descent_align(q1, q2, start.group_element, cfg);
    CHECK(non_increasing(r.energy_trace));
    CHECK(r.energy <= start.energy * (1.0 + 1e-12));
    CHECK(r.energy_trace.size() == static_cast<std::size_t>(r.iterations) + 1);
    CHECK(r.dissimilarity == std::sqrt(r.energy));
    // The composite group element reproduces the final SRVF.
    const auto direct = warp_srvf(q2, r.group_element);
    CHECK(std::abs(energy(ParamPoint::identity(), q1, direct, cfg.lambda) - r.energy) <=
          2e-2 * squared_norm(q1));
  }
}

// An odd grid size puts a = 1 on the log-uniform grid.
TEST_CASE("shape match identity invariance", "[shape]") {
  MatchConfig cfg = fast_config();
  cfg.grid_size = 51;
  test::Rng rng(49);
  for (int trial = 0; trial < 5; ++trial) {
    const auto f = test::random_function(rng, test::uniform(rng, 0.6, 1.1), 156);
    const auto r = shape_match(f, f, cfg);
    CHECK(r.dissimilarity < 1e-3 * norm(srvf_from_function(f)));
    CHECK(std::abs(std::log(r.scale())) <= grid_cell(cfg));
  }
}

// f1 observes a base curve up to c1; f2 observes all of it through a stretching element g.
// The optimal element maps [0, c1] onto [0, g^-1(c1)], so its scale is g^-1(c1) / c1.
// The lambda-weighted tail charges for the part of f2 that f1 never observed and pulls the
// minimizer away from that scale, so the tail weight is kept small here.
TEST_CASE("shape match recovers a stretched sub-piece", "[shape]") {
  MatchConfig cfg = fast_config();
  cfg.lambda = 1e-3;
  test::Rng rng(50);
  for (int trial = 0; trial < 5; ++trial) {
    const auto base = test::random_function(rng, 1.0, 400);
    const double c1 = test::uniform(rng, 0.55, 0.75);
    std::vector<double> v1(156);
    for (std::size_t i = 0; i < v1.size(); ++i) v1[i] = base(detail::uniform_node(c1, i, v1.size()));
    const CensoredFunction f1(c1, v1);
    const GroupElement stretch(test::uniform(rng, 0.75, 1.3), 1.0, test::random_unit_warp(rng, 0.1));
    const auto f2 = resample(warp_function(base, stretch), 156);
    const double a0 = stretch.inverse_at(c1) / c1;
    const auto r = shape_match(f1, f2, cfg);
    CHECK(std::abs(r.scale() / a0 - 1.0) < 0.1);
    CHECK(std::sqrt(r.matched_energy) < 0.1 * norm(srvf_from_function(f1)));
  }
}

TEST_CASE("shape match is bounded by the fixed-boundary residual at a = 1", "[shape][property]") {
  MatchConfig cfg = fast_config();
  cfg.grid_size = 51;
  test::Rng rng(51);
  for (int trial = 0; trial < 10; ++trial) {
    const auto f1 = test::random_function(rng, test::uniform(rng, 0.6, 1.1), 120);
    const auto f2 = test::random_function(rng, test::uniform(rng, 0.6, 1.1), 120);
    MatchConfig fixed = cfg;
    fixed.grid_size = 1;
    fixed.scale_lo = fixed.scale_hi = 1.0;
    const auto bound = grid_search_align(srvf_from_function(f1), srvf_from_function(f2), fixed);
    const auto r = shape_match(f1, f2, cfg);
    CHECK(r.dissimilarity <= bound.dissimilarity * (1.0 + 1e-12));
  }
}
