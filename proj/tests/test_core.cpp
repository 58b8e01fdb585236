#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "epm/core.hpp"
#include "support.hpp"

using namespace epm;
using Catch::Approx;

namespace {

CensoredFunction sampled(double c, std::size_t n, auto&& fn) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = fn(detail::uniform_node(c, i, n));
  return CensoredFunction(c, std::move(v));
}

CensoredSrvf constant_srvf(double c, double value, std::size_t n = 101) {
  return CensoredSrvf(c, std::vector<double>(n, value));
}

// Smooth warp of [0, 1] sampled finely: x + k x (1 - x).
Warp smooth_unit_warp(double k, std::size_t n = 4001) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = detail::uniform_node(1.0, i, n);
    g[i] = x + k * x * (1.0 - x);
  }
  g.back() = 1.0;
  return Warp::uniform(1.0, std::move(g));
}

double sup_diff(const detail::UniformSeries& a, const detail::UniformSeries& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
  return s;
}

}  // namespace

TEST_CASE("censored function validation", "[core]") {
  CHECK_THROWS_AS(CensoredFunction(1.0, {1.0, 2.0}), invalid_input);
  CHECK_THROWS_AS(CensoredFunction(0.0, {1.0, 2.0, 3.0}), invalid_input);
  CHECK_THROWS_AS(CensoredFunction(1.0, {1.0, NAN, 3.0}), invalid_input);
  const CensoredFunction f(2.0, {0.0, 1.0, 2.0});
  CHECK(f(0.5) == Approx(0.5));
  CHECK(f(2.0) == Approx(2.0));
  CHECK(f(2.5) == 0.0);
}

TEST_CASE("from_samples resamples non-uniform grids linearly", "[core]") {
  const std::vector<double> t{0.0, 0.1, 0.5, 1.0};
  const std::vector<double> v{0.0, 0.1, 0.5, 1.0};
  const auto f = CensoredFunction::from_samples(t, v);
  CHECK(f.censor_point() == 1.0);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(f[i] == Approx(f.time(i)).margin(1e-15));
  const std::vector<double> bad{0.0, 0.5, 0.5, 1.0};
  CHECK_THROWS_AS(CensoredFunction::from_samples(bad, v), invalid_input);
  const std::vector<double> late{0.1, 0.5, 0.7, 1.0};
  CHECK_THROWS_AS(CensoredFunction::from_samples(late, v), invalid_input);
}

TEST_CASE("srvf of linear, constant and quadratic functions", "[core]") {
  const auto lin = srvf_from_function(sampled(1.0, 101, [](double t) { return t; }));
  for (double q : lin.values()) CHECK(q == Approx(1.0).margin(1e-12));
  const auto flat = srvf_from_function(sampled(1.0, 101, [](double) { return 3.0; }));
  for (double q : flat.values()) CHECK(q == 0.0);
  const auto sq = srvf_from_function(sampled(1.0, 101, [](double t) { return t * t; }));
  CHECK(sq.initial_value() == 0.0);
  // Second-order differences are exact on quadratics.
  for (std::size_t i = 0; i < sq.size(); ++i)
    CHECK(sq[i] == Approx(std::sqrt(2.0 * sq.time(i))).margin(1e-6));
  CHECK_THROWS_AS(srvf_from_function(CensoredFunction(1.0, {0.0, 1.0})), invalid_input);
}

TEST_CASE("function from srvf", "[core]") {
  const auto f = function_from_srvf(constant_srvf(1.0, 1.0));
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(f[i] == Approx(f.time(i)).margin(1e-12));
  const auto g = function_from_srvf(CensoredSrvf(1.0, std::vector<double>(101, 0.0), 5.0));
  for (double v : g.values()) CHECK(v == 5.0);
}

TEST_CASE("srvf roundtrip on a mixture sample", "[core]") {
  const SimConfig sc;
  const auto mix = resample(simulated_template(sc, 0), 156);
  const auto back = function_from_srvf(srvf_from_function(mix));
  CHECK(sup_diff(mix, back) < 1e-3);
}

TEST_CASE("srvf roundtrip property on random functions", "[core][property]") {
  test::Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto f = test::random_function(rng, test::uniform(rng, 0.5, 2.0), 100 + rng() % 200);
    const auto back = function_from_srvf(srvf_from_function(f));
    CHECK(sup_diff(f, back) < 1e-3);
  }
}

TEST_CASE("preshape distance examples", "[core]") {
  const auto one = constant_srvf(1.0, 1.0);
  const auto zero = constant_srvf(1.0, 0.0);
  CHECK(preshape_distance(one, one) == 0.0);
  CHECK(preshape_distance(one, zero) == Approx(1.0).epsilon(1e-12));
  CHECK(preshape_distance(constant_srvf(2.0, 1.0), one) == Approx(1.0).epsilon(1e-12));
  // Different grids over the same interval.
  CHECK(preshape_distance(constant_srvf(1.0, 2.0, 37), constant_srvf(1.0, 0.5, 101)) ==
        Approx(1.5).epsilon(1e-12));
}

TEST_CASE("preshape distance is symmetric and satisfies the triangle inequality",
          "[core][property]") {
  test::Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = test::random_srvf(rng, test::uniform(rng, 0.5, 1.5), 50 + rng() % 100);
    const auto b = test::random_srvf(rng, test::uniform(rng, 0.5, 1.5), 50 + rng() % 100);
    const auto c = test::random_srvf(rng, test::uniform(rng, 0.5, 1.5), 50 + rng() % 100);
    const double ab = preshape_distance(a, b);
    CHECK(ab == preshape_distance(b, a));
    CHECK(ab <= preshape_distance(a, c) + preshape_distance(c, b) + 1e-12);
    CHECK(preshape_distance(a, a) == 0.0);
  }
}

TEST_CASE("warp_srvf examples", "[core]") {
  test::Rng rng(13);
  const auto q = test::random_srvf(rng, 2.0, 120);
  const auto same = warp_srvf(q, GroupElement::identity(0.7));
  CHECK(same.censor_point() == q.censor_point());
  CHECK(sup_diff(same, q) < 1e-12);
  const auto half = warp_srvf(q, GroupElement::scaling(2.0, 1.0));
  CHECK(half.censor_point() == Approx(1.0).epsilon(1e-15));
}

TEST_CASE("warp_srvf preserves the norm", "[core][property]") {
  test::Rng rng(14);
  for (int trial = 0; trial < 100; ++trial) {
    const auto q = test::random_srvf(rng, test::uniform(rng, 0.5, 1.5), 1000);
    const auto g = test::random_group_element(rng);
    const auto w = warp_srvf(q, g);
    CHECK(w.censor_point() == Approx(g.inverse_at(q.censor_point())).epsilon(1e-12));
    CHECK(std::abs(norm(w) - norm(q)) < 1e-3 * norm(q));
  }
}

// The action resamples on the input grid, so the error is a discretization error that
// shrinks with the grid size; random warps reach slopes near 0.0025.
TEST_CASE("preshape distance is invariant under simultaneous warping", "[core][property]") {
  test::Rng rng(15);
  for (int trial = 0; trial < 100; ++trial) {
    const auto q1 = test::random_srvf(rng, test::uniform(rng, 0.5, 1.5), 512 + rng() % 200);
    const auto q2 = test::random_srvf(rng, test::uniform(rng, 0.5, 1.5), 512 + rng() % 200);
    const auto g = test::random_group_element(rng);
    const double before = preshape_distance(q1, q2);
    const double after = preshape_distance(warp_srvf(q1, g), warp_srvf(q2, g));
    CHECK(std::abs(after - before) < 5e-3 * before);
  }
}

TEST_CASE("warp_function examples", "[core]") {
  const auto f = sampled(2.0, 101, [](double t) { return t; });
  const auto same = warp_function(f, GroupElement::identity());
  CHECK(sup_diff(same, f) < 1e-15);
  const auto w = warp_function(f, GroupElement::scaling(2.0));
  CHECK(w.censor_point() == Approx(1.0).epsilon(1e-15));
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(w[i] == Approx(2.0 * w.time(i)).margin(1e-12));
}

// q = sign(f') sqrt|f'| is not Lipschitz where f' changes sign, so this cross-path
// oracle uses increasing functions with f' bounded away from zero.
TEST_CASE("warping a function and warping its srvf agree", "[core]") {
  test::Rng rng(16);
  for (int trial = 0; trial < 20; ++trial) {
    const double c = test::uniform(rng, 0.6, 1.4);
    const double amp = test::uniform(rng, 0.1, 0.8);
    const double freq = test::uniform(rng, 1.0, 3.0);
    const auto f = sampled(c, 400, [&](double t) {
      return t + amp * std::sin(2.0 * std::numbers::pi * freq * t) / (2.0 * std::numbers::pi * freq);
    });
    const GroupElement g(test::uniform(rng, 0.7, 1.4), test::uniform(rng, 0.3, 1.0),
                         smooth_unit_warp(test::uniform(rng, -0.6, 0.6)));
    const auto via_f = srvf_from_function(warp_function(f, g));
    const auto via_q = warp_srvf(srvf_from_function(f), g);
    REQUIRE(via_f.size() == via_q.size());
    // The pivot is a kink of g; compare away from the two nodes next to it.
    double sup = 0.0;
    const double pivot = g.pivot();
    for (std::size_t i = 0; i < via_f.size(); ++i) {
      if (std::abs(via_f.time(i) - pivot) <= 2.0 * via_f.spacing()) continue;
      sup = std::max(sup, std::abs(via_f[i] - via_q[i]));
    }
    CHECK(sup < 1e-2);
  }
}

TEST_CASE("warp validation", "[core]") {
  CHECK_THROWS_AS(Warp({0.0, 0.5, 1.0}, {0.0, 0.6, 0.6}), invalid_input);
  CHECK_THROWS_AS(Warp({0.0, 0.5, 1.0}, {0.1, 0.6, 1.0}), invalid_input);
  CHECK_THROWS_AS(Warp({0.0, 0.5, 1.0}, {0.0, 0.6, 0.9}), invalid_input);
  const Warp w({0.0, 0.5, 1.0}, {0.0, 0.25, 1.0});
  CHECK(w(0.25) == Approx(0.125));
  CHECK(w.inverse(0.625) == Approx(0.75));
  CHECK(w.inverted()(0.25) == Approx(0.5));
  CHECK_THROWS_AS(GroupElement(0.0, 1.0, Warp::identity(1.0)), invalid_input);
  CHECK_THROWS_AS(GroupElement(1.0, 1.0, Warp::identity(2.0)), invalid_input);
}

TEST_CASE("group element evaluation rule", "[core]") {
  const GroupElement g(2.0, 0.5, Warp({0.0, 0.5, 1.0}, {0.0, 0.25, 1.0}));
  CHECK(g(0.25) == Approx(2.0 * 0.5 * 0.25));
  CHECK(g(0.5) == Approx(1.0));
  CHECK(g(1.0) == Approx(2.0));
  CHECK(g.inverse_at(g(0.3)) == Approx(0.3));
  CHECK(g.inverse_at(g(0.9)) == Approx(0.9));
}

TEST_CASE("semidirect composition equals pointwise composition", "[core][property]") {
  test::Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g1 = test::random_group_element(rng);
    const auto g2 = test::random_group_element(rng);
    const auto g12 = compose(g1, g2);
    CHECK(g12.scale() == Approx(g1.scale() * g2.scale()).epsilon(1e-14));
    for (int k = 0; k <= 200; ++k) {
      const double t = 2.0 * k / 200.0;
      CHECK(g12(t) == Approx(g1(g2(t))).margin(1e-12));
    }
  }
}

TEST_CASE("group inverse and identity", "[core][property]") {
  test::Rng rng(18);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = test::random_group_element(rng);
    const auto gi = g.inverse();
    const auto e1 = compose(g, gi);
    const auto e2 = compose(gi, g);
    const auto id = compose(g, GroupElement::identity(0.8));
    for (int k = 0; k <= 200; ++k) {
      const double t = 2.0 * k / 200.0;
      CHECK(std::abs(e1(t) - t) < 1e-6);
      CHECK(std::abs(e2(t) - t) < 1e-6);
      CHECK(std::abs(id(t) - g(t)) < 1e-12);
    }
  }
}

TEST_CASE("composition is associative", "[core][property]") {
  test::Rng rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = test::random_group_element(rng);
    const auto b = test::random_group_element(rng);
    const auto c = test::random_group_element(rng);
    const auto left = compose(compose(a, b), c);
    const auto right = compose(a, compose(b, c));
    const auto chain = compose_chain({a, b, c}, 4000);
    CHECK(left.pivot() == Approx(right.pivot()).epsilon(1e-12));
    CHECK(chain.pivot() == Approx(left.pivot()).epsilon(1e-12));
    for (int k = 0; k <= 100; ++k) {
      const double t = 2.0 * k / 100.0;
      CHECK(left(t) == Approx(right(t)).margin(1e-12));
      CHECK(chain(t) == Approx(left(t)).margin(1e-3));
    }
  }
}

TEST_CASE("rescale_domain and resample", "[core]") {
  const auto f = sampled(2.0, 51, [](double t) { return t * t; });
  const auto r = rescale_domain(f, 1.0, 101);
  CHECK(r.censor_point() == 1.0);
  CHECK(r.size() == 101);
  CHECK(r[100] == Approx(4.0));
  CHECK(r(0.5) == Approx(f(1.0)).epsilon(1e-3));
  const auto s = resample(f, 26);
  CHECK(s.size() == 26);
  CHECK(s[25] == Approx(4.0));
}
