#include <cmath>
#include <sstream>

#include "doctest.h"
#include "hsgt/error.hpp"
#include "hsgt/hybrid.hpp"

using namespace hsgt;
using namespace hsgt::hybrid;

namespace {

const char* kBox = "max(abs(x1), abs(x2)) - 1";
const char* kOutside = "1 - max(abs(x1), abs(x2))";

// Two scalar subsystems with decoupled decay, halving jumps on the unit box.
NetworkSpec decoupled() {
  return compose_network({parse_subsystem("s1", {"-x1"}, {"0.5*x1"}, kBox, kOutside, 2, 1),
                          parse_subsystem("s2", {"-x2"}, {"0.5*x2"}, kBox, kOutside, 2, 1)},
                         1);
}

NetworkSpec coupled() {
  return compose_network(
      {parse_subsystem("s1", {"-x1 + 0.25*x2 + 0.25*u1"}, {"0.5*x1"}, kBox, kOutside, 2, 1),
       parse_subsystem("s2", {"-x2 + 0.25*x1 + 0.25*u1"}, {"0.5*x2"}, kBox, kOutside, 2, 1)},
      1);
}

NetworkSpec pure_flow() { return compose_network({parse_subsystem("s", {"-x1"}, {"x1"}, "", "", 1, 0)}, 0); }

void check_domain(const SolutionPair& sol) {
  CHECK_NOTHROW(sol.x.domain().validate());
  const auto dx = sol.x.domain(), du = sol.u.domain();
  REQUIRE(dx.intervals().size() == du.intervals().size());
  for (std::size_t i = 0; i < dx.intervals().size(); ++i) {
    CHECK(dx.intervals()[i].t_begin == du.intervals()[i].t_begin);
    CHECK(dx.intervals()[i].t_end == du.intervals()[i].t_end);
  }
}

}  // namespace

TEST_CASE("hybrid signals and domains") {
  HybridSignal s(1);
  s.append(0.0, 0, {3.0});
  s.append(0.5, 0, {3.0});
  s.append(0.5, 1, {3.0});
  s.append(1.0, 1, {3.0});
  CHECK_THROWS_AS(s.append(0.9, 1, {3.0}), Error);
  CHECK_THROWS_AS(s.append(1.0, 3, {3.0}), Error);
  const auto d = s.domain();
  CHECK(d.jumps() == 1);
  CHECK(d.contains({0.7, 1}));
  CHECK_FALSE(d.contains({0.7, 0}));
  CHECK(sup_norm(s, {0.7, 1}) == 3.0);
  CHECK_THROWS_AS(sup_norm(s, {0.7, 0}), Error);
  CHECK(s.at({0.25, 0})[0] == 3.0);

  HybridSignal z(2);
  z.append(0.0, 0, {0.0, 0.0});
  z.append(1.0, 0, {0.0, 0.0});
  CHECK(sup_norm(z, {1.0, 0}) == 0.0);

  CHECK_THROWS_AS(HybridTimeDomain({{0.0, 1.0, 0}, {1.0, 2.0, 2}}), Error);
  CHECK_THROWS_AS(HybridTimeDomain({{0.0, 1.0, 0}, {0.5, 2.0, 1}}), Error);
}

TEST_CASE("compose_network jump-set equality") {
  const auto net = decoupled();
  CHECK(net.jump_sets_equal());
  CHECK(net.warnings().empty());
  CHECK(net.state_dim() == 2);

  const auto mixed = compose_network({parse_subsystem("s1", {"-x1"}, {"0.5*x1"}, "", "1 - x1", 2, 0),
                                      parse_subsystem("s2", {"-x2"}, {"x2"}, "", "", 2, 0)},
                                     0);
  CHECK_FALSE(mixed.jump_sets_equal());
  CHECK(mixed.warnings().size() == 1);

  // Same set written differently.
  const auto same = compose_network({parse_subsystem("s1", {"-x1"}, {"x1"}, "", "1 - x1", 2, 0),
                                     parse_subsystem("s2", {"-x2"}, {"x2"}, "", "2*(1 - x1)", 2, 0)},
                                    0);
  CHECK(same.jump_sets_equal());

  // g~ applies g_i only inside D_i.
  const std::vector<double> x{1.5, 5.0}, none{};
  const auto mixed_d = compose_network({parse_subsystem("s1", {"-x1"}, {"0.5*x1"}, "", "1 - x1", 2, 0),
                                        parse_subsystem("s2", {"-x2"}, {"0.5*x2"}, "", "10 - x2", 2, 0)},
                                       0);
  CHECK(mixed_d.jump(x, none) == std::vector<double>{0.75, 5.0});

  CHECK_THROWS_AS(parse_subsystem("bad", {"-x3"}, {"x1"}, "", "", 2, 0), UnknownIdentifier);
  SubsystemSpec wrong = parse_subsystem("s", {"-x1"}, {"x1"}, "", "", 1, 0);
  wrong.dim = 2;
  CHECK_THROWS_AS(compose_network({wrong}, 0), DimensionError);
}

TEST_CASE("simulation of the decoupled reference network") {
  const auto net = decoupled();
  const auto sol = simulate(net, {2.0, 0.0}, InputSignal::zero(1), 1.0, 100);
  check_domain(sol);
  REQUIRE(sol.x.size() > 3);
  CHECK(sol.x[0].value == std::vector<double>{2.0, 0.0});
  CHECK(sol.x[1].value == std::vector<double>{1.0, 0.0});
  CHECK(sol.x[2].value == std::vector<double>{0.5, 0.0});
  CHECK(sol.x[2].k == 2);
  CHECK(sol.x.back().t == 1.0);
  CHECK(sol.x.back().k == 2);
  CHECK(std::abs(sol.x.back().value[0] - 0.5 * std::exp(-1.0)) < 1e-6);
  CHECK(sol.reason == Termination::HorizonReached);
  CHECK(sup_norm(sol.x, {0.0, 2}) == 2.0);

  const auto r = restrict(sol.x, {0.0, 2}, {1.0, 2});
  CHECK(r[0].value == std::vector<double>{0.0, 0.0});
  CHECK(r[1].value == std::vector<double>{0.0, 0.0});
  CHECK(r[2].value == std::vector<double>{0.5, 0.0});
  const auto full = restrict(sol.x, {0.0, 0}, sol.x.domain().end());
  for (std::size_t i = 0; i < sol.x.size(); ++i) CHECK(full[i].value == sol.x[i].value);
}

TEST_CASE("frozen state under differing jump sets") {
  const auto net = compose_network({parse_subsystem("s1", {"-x1"}, {"x1"}, "", "1 - x1", 2, 0),
                                    parse_subsystem("s2", {"-x2"}, {"x2"}, "", "", 2, 0)},
                                   0);
  const auto sol = simulate(net, {1.0, 5.0}, InputSignal::zero(0), 1.0, 6);
  CHECK(sol.reason == Termination::MaxJumps);
  CHECK(sol.x.domain().jumps() == 6);
  for (const auto& s : sol.x.samples()) {
    CHECK(s.t == 0.0);
    CHECK(s.value == std::vector<double>{1.0, 5.0});
  }
}

TEST_CASE("pure flow and semigroup property") {
  const auto net = pure_flow();
  const auto sol = simulate(net, {1.0}, InputSignal::zero(0), 1.0, 0);
  CHECK(std::abs(sol.x.back().value[0] - std::exp(-1.0)) < 1e-6);
  CHECK(sol.x.domain().jumps() == 0);

  const auto a = simulate(net, {1.0}, InputSignal::zero(0), 0.4, 0);
  const auto b = simulate(net, a.x.back().value, InputSignal::zero(0), 0.7, 0);
  const auto ab = simulate(net, {1.0}, InputSignal::zero(0), 1.1, 0);
  CHECK(std::abs(b.x.back().value[0] - ab.x.back().value[0]) < 1e-8);
}

TEST_CASE("RK4 converges with fourth order") {
  const auto net = decoupled();
  const double exact = 0.5 * std::exp(-1.0);
  auto err = [&](double h) {
    SimOptions o;
    o.step = h;
    const auto sol = simulate(net, {2.0, 0.0}, InputSignal::zero(1), 1.0, 100, o);
    return std::abs(sol.x.back().value[0] - exact);
  };
  const double ratio = err(0.1) / err(0.05);
  CHECK(ratio >= 8.0);
  CHECK(ratio <= 32.0);
}

TEST_CASE("event location on the flow set boundary") {
  // x grows until it reaches the unit box boundary, then jumps to half.
  const auto net = compose_network({parse_subsystem("s", {"1"}, {"0.5*x1"}, "x1 - 1", "1 - x1", 1, 0)}, 0);
  const auto sol = simulate(net, {0.0}, InputSignal::zero(0), 2.0, 10);
  check_domain(sol);
  const auto dom = sol.x.domain();
  const auto& iv = dom.intervals();
  REQUIRE(iv.size() >= 3);
  CHECK(std::abs(iv[0].t_end - 1.0) < 1e-8);
  CHECK(std::abs(iv[1].t_end - 1.5) < 1e-8);
  // Jump priority: no flow interval of positive length starts strictly inside D.
  for (std::size_t i = 0; i < sol.x.size(); ++i) {
    if (i + 1 < sol.x.size() && sol.x[i + 1].k == sol.x[i].k && (i == 0 || sol.x[i - 1].k != sol.x[i].k)) {
      CHECK(net.jump_guard(sol.x[i].value, {}) >= -1e-9);
    }
  }
  CHECK(sol.x.domain().jumps() == static_cast<std::size_t>(sol.x.back().k));
}

TEST_CASE("leaving C and D terminates the solution") {
  const auto net = compose_network({parse_subsystem("s", {"1"}, {"x1"}, "x1 - 1", "", 1, 0)}, 0);
  const auto sol = simulate(net, {0.0}, InputSignal::zero(0), 5.0, 10);
  CHECK(sol.reason == Termination::LeftSets);
  CHECK_FALSE(sol.complete());
  CHECK(std::abs(sol.x.back().t - 1.0) < 1e-8);
  CHECK_THROWS_AS(simulate(net, {2.0}, InputSignal::zero(0), 1.0, 1), Error);
}

TEST_CASE("inputs and CSV output") {
  const auto net = coupled();
  const auto u = InputSignal::table({0.0, 0.5}, {{0.0}, {1.0}});
  CHECK(u(0.2, 0)[0] == 0.0);
  CHECK(u(0.7, 0)[0] == 1.0);
  const auto ue = InputSignal::expressions({expr::parse_expr("exp(-t) + k", {"t", "k"})});
  CHECK(ue(0.0, 2)[0] == 3.0);
  const auto sol = simulate(net, {0.5, -0.5}, u, 0.01, 10);
  std::ostringstream csv;
  write_csv(csv, sol);
  const std::string text = csv.str();
  CHECK(text.rfind("t,k,x_1,x_2,u_1,phase\n", 0) == 0);
  CHECK(text.find("flow") != std::string::npos);

  const auto jumped = simulate(decoupled(), {2.0, 0.0}, InputSignal::zero(1), 0.01, 100);
  std::ostringstream j;
  write_csv(j, jumped);
  std::size_t jump_rows = 0;
  for (std::size_t p = j.str().find(",jump\n"); p != std::string::npos; p = j.str().find(",jump\n", p + 1))
    ++jump_rows;
  CHECK(jump_rows == 3);  // two jumps share the middle row
}
