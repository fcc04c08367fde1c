#include <cmath>
#include <random>

#include "doctest.h"
#include "hsgt/cycles.hpp"
#include "hsgt/error.hpp"
#include "hsgt/gain_network.hpp"

using namespace hsgt;
using namespace hsgt::gain;
using kfun::KFun;

namespace {

GainMatrix two_node(const char* g12, const char* g21) {
  GainMatrix g(2);
  g.set(0, 1, KFun::parse(g12));
  g.set(1, 0, KFun::parse(g21));
  return g;
}

// Growth rate of the max-times power iteration x <- A (x) x. For a max-linear
// operator this is the largest cycle geometric mean, which is independent of
// the cycle enumeration used by small_gain_check.
double max_times_spectral_radius(const std::vector<std::vector<double>>& c) {
  const std::size_t n = c.size();
  std::vector<double> x(n, 1.0);
  double log_growth = 0.0;
  const int burn_in = 500, iters = 5000;
  for (int k = 0; k < burn_in + iters; ++k) {
    std::vector<double> y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) y[i] = std::max(y[i], c[i][j] * x[j]);
    double m = 0.0;
    for (double v : y) m = std::max(m, v);
    if (m == 0.0) return 0.0;
    for (auto& v : y) v /= m;
    if (k >= burn_in) log_growth += std::log(m);
    x = std::move(y);
  }
  return std::exp(log_growth / iters);
}

}  // namespace

TEST_CASE("simple cycle enumeration") {
  graph::Adjacency complete3{{1, 2}, {0, 2}, {0, 1}};
  std::size_t count = graph::for_each_simple_cycle(complete3, [](const auto&) { return true; });
  CHECK(count == 5);  // three 2-cycles and two 3-cycles
  graph::Adjacency dag{{1}, {2}, {}};
  CHECK(graph::for_each_simple_cycle(dag, [](const auto&) { return true; }) == 0);
  graph::Adjacency complete4{{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
  CHECK(graph::for_each_simple_cycle(complete4, [](const auto&) { return true; }) == 20);
}

TEST_CASE("gain matrix invariants") {
  GainMatrix g(2);
  CHECK_THROWS_AS(g.set(0, 0, KFun::parse("s")), Error);
  CHECK_THROWS_AS(g.set(0, 1, KFun::parse("s/(1+s)")), Error);
  CHECK_THROWS_AS(g.set(0, 2, KFun::parse("s")), DimensionError);
  g.set(0, 0, KFun::zero());
  CHECK_FALSE(g.has_edge(0, 0));
}

TEST_CASE("gamma_max_apply and iterate_gamma") {
  const GainMatrix g = two_node("0.5*s", "0.5*s");
  const std::vector<double> s{2.0, 4.0};
  CHECK(gamma_max_apply(g, s) == std::vector<double>{2.0, 1.0});
  CHECK(gamma_max_apply(g, std::vector<double>{0.0, 0.0}) == std::vector<double>{0.0, 0.0});
  CHECK(iterate_gamma(g, std::vector<double>{1.0, 1.0}, 2) == std::vector<double>{0.25, 0.25});
  CHECK(iterate_gamma(g, s, 0) == s);
  CHECK(iterate_gamma(g, s, 1) == gamma_max_apply(g, s));
  CHECK_THROWS_AS(gamma_max_apply(g, std::vector<double>{1.0}), DimensionError);

  GainMatrix h(3);
  h.set(0, 2, KFun::parse("s^2"));
  CHECK(gamma_max_apply(h, std::vector<double>{0.0, 0.0, 3.0}) == std::vector<double>{9.0, 0.0, 0.0});
}

TEST_CASE("gamma_max is monotone") {
  GainMatrix g(3);
  g.set(0, 1, KFun::parse("s^2"));
  g.set(1, 2, KFun::parse("0.3*s"));
  g.set(2, 0, KFun::parse("max(s, s^0.5)"));
  g.set(0, 2, KFun::parse("s/(1+s) + s"));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 10.0), bump(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> s{u(rng), u(rng), u(rng)}, t = s;
    for (auto& x : t) x += bump(rng);
    const auto gs = gamma_max_apply(g, s), gt = gamma_max_apply(g, t);
    for (int i = 0; i < 3; ++i) CHECK(gs[i] <= gt[i]);
  }
}

TEST_CASE("small-gain check examples") {
  const auto holds = small_gain_check(two_node("0.5*s", "0.5*s"));
  CHECK(holds.status == Verdict::Holds);
  CHECK_FALSE(holds.vector_witness.has_value());
  CHECK(holds.worst_cycle_ratio == doctest::Approx(0.25));

  const GainMatrix bad = two_node("2*s", "s");
  const auto fails = small_gain_check(bad);
  CHECK(fails.status == Verdict::Fails);
  REQUIRE(fails.cycle_witness.has_value());
  CHECK(fails.cycle_witness->composed >= fails.cycle_witness->radius);
  REQUIRE(fails.vector_witness.has_value());
  const auto g = gamma_max_apply(bad, *fails.vector_witness);
  for (int i = 0; i < 2; ++i) CHECK(g[i] >= (*fails.vector_witness)[i]);

  GainMatrix tri(3);
  tri.set(0, 1, KFun::parse("s^2"));
  tri.set(1, 2, KFun::parse("s^2"));
  tri.set(2, 0, KFun::parse("s^2"));
  CHECK(cycle_gain(tri, {0, 1, 2}, 2.0) == 256.0);
  const auto tv = small_gain_check(tri);
  CHECK(tv.status == Verdict::Fails);
  CHECK_FALSE(tv.methods_disagree);

  kfun::Grid coarse{1e-8, 1e8, 8};
  CHECK_THROWS_AS(small_gain_check(tri, {.grid = coarse}), Error);
}

TEST_CASE("vanishing margin is inconclusive") {
  const auto v = small_gain_check(two_node("s", "(1 - 1e-12)*s"));
  CHECK(v.status == Verdict::Inconclusive);
  CHECK(v.worst_cycle_ratio == doctest::Approx(1.0));
}

TEST_CASE("linear gains agree with the max-times spectral radius") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(2, 6);
  std::uniform_real_distribution<double> coef(0.0, 2.0), keep(0.0, 1.0);
  int compared = 0;
  for (int trial = 0; compared < 50 && trial < 500; ++trial) {
    const std::size_t n = static_cast<std::size_t>(size(rng));
    std::vector<std::vector<double>> c(n, std::vector<double>(n, 0.0));
    GainMatrix g(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j || keep(rng) < 0.3) continue;
        c[i][j] = coef(rng);
        g.set(i, j, KFun::linear(c[i][j]));
      }
    const double rho = max_times_spectral_radius(c);
    if (std::abs(rho - 1.0) < 1e-3) continue;  // too close to call for the oracle
    ++compared;
    const auto v = small_gain_check(g, {.seed = static_cast<std::uint64_t>(trial)});
    CHECK_FALSE(v.methods_disagree);
    if (rho < 1.0) {
      CHECK(v.status == Verdict::Holds);
    } else {
      CHECK(v.status == Verdict::Fails);
      REQUIRE(v.vector_witness.has_value());
      const auto gs = gamma_max_apply(g, *v.vector_witness);
      for (std::size_t i = 0; i < n; ++i) CHECK(gs[i] >= (*v.vector_witness)[i]);
    }
  }
  CHECK(compared == 50);
}

TEST_CASE("ordinary spectral radius is not the right oracle") {
  // All off-diagonal entries 0.6: ordinary spectral radius 1.2, yet every
  // cycle has gain 0.6^m r < r.
  GainMatrix g(3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) g.set(i, j, KFun::linear(0.6));
  CHECK(small_gain_check(g).holds());
}

TEST_CASE("omega path examples") {
  const auto grid = kfun::Grid::standard().values();
  const GainMatrix g = two_node("0.5*s", "0.5*s");
  const std::vector<double> ones{1.0, 1.0};
  const auto path = build_omega_path(g, ones);
  CHECK(path.inflation == 0.0);
  for (double r : grid) {
    CHECK(path.sigma[0](r) == doctest::Approx(r).epsilon(1e-15));
    CHECK(path.sigma[1](r) == doctest::Approx(r).epsilon(1e-15));
  }
  CHECK(path.min_relative_margin == doctest::Approx(0.5));

  GainMatrix single(1);
  const std::vector<double> a{3.0};
  const auto p1 = build_omega_path(single, a);
  CHECK(p1.sigma[0](2.0) == 6.0);

  GainMatrix acyclic(2);
  acyclic.set(0, 1, KFun::parse("0.5*s"));
  const auto pa = build_omega_path(acyclic, ones);
  for (double r : grid) {
    CHECK(pa.sigma[0](r) == doctest::Approx(r));
    CHECK(pa.sigma[1](r) == doctest::Approx(r));
  }

  const KFun phi = compose_phi(path, g);
  for (double r : grid) CHECK(phi(r) == doctest::Approx(r));
}

TEST_CASE("omega path with a tight cycle needs inflation") {
  // gamma_12 gamma_21 = 0.75 < 1, but with a = (1,1) the plain construction
  // gives Gamma_max(sigma)_1 = sigma_1.
  const GainMatrix g = two_node("1.5*s", "0.5*s");
  REQUIRE(small_gain_check(g).holds());
  const std::vector<double> ones{1.0, 1.0};
  const auto path = build_omega_path(g, ones);
  CHECK(path.inflation > 0.0);
  CHECK(path.min_relative_margin > 0.0);
  for (double r : kfun::Grid::standard().values()) {
    const auto s = path(r);
    const auto gs = gamma_max_apply(g, s);
    CHECK(gs[0] < s[0]);
    CHECK(gs[1] < s[1]);
  }
  CHECK_NOTHROW(compose_phi(path, g));
}

TEST_CASE("omega path nonlinear network and anchor scaling") {
  GainMatrix ok(3);
  ok.set(0, 1, KFun::parse("0.5*s/(1+s) + 0.2*s"));
  ok.set(1, 2, KFun::parse("0.8*s"));
  ok.set(2, 0, KFun::parse("0.9*s^0.5 + 0.5*s"));
  ok.set(2, 1, KFun::parse("0.3*s"));
  const auto v = small_gain_check(ok);
  INFO(v.note);
  // The cycle 0 -> 1 -> 2 -> 0 is not contracting near 0 because of the square root.
  CHECK(v.status == Verdict::Fails);

  GainMatrix lin(3);
  lin.set(0, 1, KFun::parse("0.5*s + 0.1*s^2/(1+s)"));
  lin.set(1, 2, KFun::parse("0.8*s"));
  lin.set(2, 0, KFun::parse("0.9*s"));
  lin.set(2, 1, KFun::parse("0.3*s"));
  REQUIRE(small_gain_check(lin).holds());
  const std::vector<double> a{1.0, 2.0, 0.5};
  const auto p = build_omega_path(lin, a);
  const double c = 3.0;
  const std::vector<double> ca{c * a[0], c * a[1], c * a[2]};
  const auto q = build_omega_path(lin, ca);
  for (double r : kfun::Grid::standard().values()) {
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(q.sigma[i](r) == doctest::Approx(p.sigma[i](c * r)).epsilon(1e-12));
    }
    const auto s = p(r);
    const auto gs = gamma_max_apply(lin, s);
    for (std::size_t i = 0; i < 3; ++i) CHECK(gs[i] < s[i]);
  }
  for (const auto& s : p.sigma) CHECK(s.classification().cls == kfun::FunctionClass::ClassKInfinity);
  CHECK_NOTHROW(compose_phi(p, lin));
}
