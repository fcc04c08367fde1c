#include <cmath>

#include "doctest.h"
#include "hsgt/error.hpp"
#include "hsgt/traj_verify.hpp"

using namespace hsgt;
using namespace hsgt::traj;
using hybrid::InputSignal;
using hybrid::parse_subsystem;

namespace {

hybrid::NetworkSpec reference(const std::string& drift = "-") {
  const char* box = "max(abs(x1), abs(x2)) - 1";
  const char* out = "1 - max(abs(x1), abs(x2))";
  return hybrid::compose_network(
      {parse_subsystem("s1", {drift + "x1 + 0.25*x2 + 0.25*u1"}, {"0.5*x1"}, box, out, 2, 1),
       parse_subsystem("s2", {drift + "x2 + 0.25*x1 + 0.25*u1"}, {"0.5*x2"}, box, out, 2, 1)},
      1);
}

hybrid::NetworkSpec frozen() {
  return hybrid::compose_network({parse_subsystem("s1", {"-x1"}, {"x1"}, "", "1 - x1", 2, 0),
                                  parse_subsystem("s2", {"-x2"}, {"x2"}, "", "", 2, 0)},
                                 0);
}

std::vector<SubsystemEstimate> estimates(double decay, KFun sigma = KFun::identity(), const char* gain = "0.5*s") {
  std::vector<SubsystemEstimate> out(2);
  for (std::size_t i = 0; i < 2; ++i) {
    out[i].beta = {1.0, decay};
    out[i].sigma = sigma;
    out[i].gains = {KFun::zero(), KFun::zero()};
    out[i].gains[1 - i] = KFun::parse(gain);
    out[i].input_gain = KFun::parse(gain);
  }
  return out;
}

hybrid::SolutionPair run(const hybrid::NetworkSpec& net, std::vector<double> x0, double level, double horizon = 20.0) {
  return hybrid::simulate(net, x0, InputSignal::constant({level}), horizon, 100);
}

}  // namespace

TEST_CASE("beta family") {
  const Beta b{2.0, 0.5};
  CHECK(b(3.0, 1.0, 1) == doctest::Approx(6.0 * std::exp(-1.0)));
  CHECK_THROWS_AS((Beta{0.5, 1.0}.validate()), Error);
  CHECK_THROWS_AS((Beta{1.0, 0.0}.validate()), Error);
  CHECK_NOTHROW((Beta{1.0, 1e-3}.validate()));
}

TEST_CASE("ISS estimate on the reference network") {
  const auto net = reference();
  const auto sol = run(net, {2.0, 0.0}, 0.0);
  CHECK(check_iss({sol}, net, estimates(0.4)).pass());

  const auto fast = check_iss({sol}, net, estimates(10.0));
  CHECK_FALSE(fast.pass());
  const auto& t = fast.trajectories.front();
  CHECK(t.worst_at.t < 0.5);
  CHECK(t.lhs > t.rhs);

  const auto zero = run(net, {0.0, 0.0}, 0.0);
  const auto z = check_iss({zero}, net, estimates(10.0));
  CHECK(z.pass());
  CHECK(z.trajectories.front().checks == 2 * zero.x.samples().size());

  CHECK_THROWS_AS(check_iss({sol}, net, {estimates(0.4).front()}), DimensionError);
  CHECK_THROWS_AS(check_iss({sol}, net, estimates(-1.0)), Error);
}

TEST_CASE("no-decay envelope with measured gains always passes") {
  const auto net = reference();
  for (double level : {0.0, 0.5, 2.0}) {
    const auto sol = run(net, {0.7, -1.5}, level, 5.0);
    const auto sup = hybrid::running_sup_norm(sol.x).back();
    const auto supu = hybrid::running_sup_norm(sol.u).back();
    auto est = estimates(1e-12);
    for (auto& e : est) {
      e.gains = {KFun::linear(1.0), KFun::linear(1.0)};
      e.input_gain = KFun::linear(supu > 0 ? sup / supu : 1.0);
    }
    CHECK(check_iss({sol}, net, est).pass());
  }
}

TEST_CASE("pre-GS estimate") {
  const auto net = reference();
  const auto sol = run(net, {2.0, 0.0}, 0.0);
  const CompositeEstimate comp{{}, KFun::identity(), KFun::parse("0.5*s")};
  CHECK(check_pre_gs({sol}, net, estimates(1.0), comp).pass());

  const auto tight = check_pre_gs({sol}, net, estimates(1.0, KFun::parse("0.4*s")));
  CHECK_FALSE(tight.pass());
  CHECK(tight.trajectories.front().worst_at.t == 0.0);
  CHECK(tight.trajectories.front().worst_at.k == 0);
  CHECK(tight.trajectories.front().lhs == doctest::Approx(2.0));
  CHECK(tight.trajectories.front().rhs == doctest::Approx(0.8));

  // Constant input from rest: the state settles at 1/3, below 0.5 |u|.
  const auto forced = run(net, {0.0, 0.0}, 1.0);
  const auto r = check_pre_gs({forced}, net, estimates(1.0), comp);
  CHECK(r.pass());
  CHECK(hybrid::running_sup_norm(forced.x).back() == doctest::Approx(1.0 / 3.0).epsilon(1e-4));
}

TEST_CASE("asymptotic gain") {
  const auto net = reference();
  const CompositeEstimate comp{{}, KFun::identity(), KFun::identity()};
  CHECK(check_ag({run(net, {2.0, -0.5}, 0.0, 30.0)}, net, estimates(1.0), comp).pass());

  const auto forced = run(net, {0.0, 0.0}, 1.0);
  const auto r = check_ag({forced}, net, estimates(1.0), comp);
  CHECK(r.pass());
  CHECK(tail_max(forced, 0.2) == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  CHECK(r.trajectories.front().tail_samples > 0);
  CHECK(r.trajectories.front().tail_from == doctest::Approx(16.0));

  // Doubling the horizon hardly moves the tail.
  CHECK(std::abs(tail_max(run(net, {0.0, 0.0}, 1.0, 40.0), 0.2) - tail_max(forced, 0.2)) < 1e-3);

  const auto fz = frozen();
  const auto stuck = hybrid::simulate(fz, {1.0, 5.0}, InputSignal::zero(0), 1.0, 10);
  std::vector<SubsystemEstimate> est(2);
  for (auto& e : est) e.gains = {KFun::identity(), KFun::identity()};
  est[1].gains[0] = KFun::parse("0.5*s");
  const auto bad = check_ag({stuck}, fz, est, CompositeEstimate{{}, KFun::identity(), KFun::identity()});
  CHECK_FALSE(bad.pass());
  CHECK(bad.trajectories.front().lhs == doctest::Approx(5.0));
  CHECK(bad.trajectories.front().rhs == doctest::Approx(0.0));

  CHECK_THROWS_AS(check_ag({forced}, net, estimates(1.0), comp, 0.0), Error);
  CHECK_THROWS_AS(check_ag({forced}, net, estimates(1.0), comp, 1.0), Error);
}

TEST_CASE("zero-input pre-stability") {
  const std::vector<double> grid{0.1, 0.25, 0.5, 1.0};
  PrestabilityOptions opt;
  opt.directions = 8;
  const auto ok = check_zero_input_prestability(reference(), grid, grid, opt);
  CHECK(ok.pass());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    REQUIRE(ok.delta[k].has_value());
    CHECK(*ok.delta[k] == grid[k]);
    CHECK(ok.reach[k] == doctest::Approx(grid[k]));
  }

  const auto bad = check_zero_input_prestability(reference("+"), grid, {0.5}, opt);
  CHECK_FALSE(bad.pass());

  const auto loose = check_zero_input_prestability(reference("+"), grid, {10.0}, opt);
  CHECK(loose.pass());
  CHECK(*loose.delta.front() == 1.0);

  CHECK_THROWS_AS(check_zero_input_prestability(reference(), {}, grid, opt), Error);
  CHECK_THROWS_AS(check_zero_input_prestability(reference(), {0.5, 0.1}, grid, opt), Error);
}

TEST_CASE("empirical gain table") {
  const auto table = fit_empirical_gain(reference(), {0.0, 0.5, 1.0, 2.0});
  REQUIRE(table.gain.size() == 4);
  CHECK(table.gain[0] == 0.0);
  CHECK(table.gain[1] == doctest::Approx(1.0 / 6.0).epsilon(1e-5));
  CHECK(table.gain[2] == doctest::Approx(1.0 / 3.0).epsilon(1e-5));
  CHECK(table.gain[3] == doctest::Approx(2.0 / 3.0).epsilon(1e-5));
  CHECK(table.skipped.empty());
  CHECK_THROWS_AS(fit_empirical_gain(reference(), {1.0, 0.5}), Error);
}

TEST_CASE("batch simulation matches sequential runs") {
  const auto net = reference();
  std::vector<std::vector<double>> x0s;
  std::vector<InputSignal> us;
  for (int k = 0; k < 12; ++k) {
    x0s.push_back({0.2 * k - 1.0, 0.1 * k});
    us.push_back(InputSignal::constant({0.1 * k}));
  }
  const auto batch = simulate_batch(net, x0s, us, 3.0, 20);
  for (std::size_t k = 0; k < x0s.size(); ++k) {
    const auto one = hybrid::simulate(net, x0s[k], us[k], 3.0, 20);
    CHECK(batch[k].x.samples().size() == one.x.samples().size());
    CHECK(batch[k].x.back().value == one.x.back().value);
  }
  CHECK_THROWS_AS(simulate_batch(net, x0s, {}, 1.0, 1), DimensionError);
}
