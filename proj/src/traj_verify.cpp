#include "hsgt/traj_verify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <random>
#include <sstream>
#include <thread>

#include "hsgt/error.hpp"

namespace hsgt::traj {

double Beta::operator()(double r, double t, double k) const { return M * r * std::exp(-c * (t + k)); }

void Beta::validate() const {
  if (!(M >= 1.0) || !(c > 0.0) || !std::isfinite(M) || !std::isfinite(c))
    throw Error("beta needs M >= 1 and c > 0");
}

bool BatchResult::pass() const {
  return std::all_of(trajectories.begin(), trajectories.end(), [](const auto& t) { return t.pass; });
}

bool PrestabilityResult::pass() const {
  return std::all_of(delta.begin(), delta.end(), [](const auto& d) { return d.has_value(); });
}

namespace {

double block(const std::vector<double>& x, std::size_t offset, std::size_t dim) {
  double m = 0.0;
  for (std::size_t k = 0; k < dim; ++k) m = std::max(m, std::abs(x[offset + k]));
  return m;
}

void require_shapes(const hybrid::NetworkSpec& net, const std::vector<SubsystemEstimate>& est, bool need_sigma) {
  const std::size_t n = net.size();
  if (est.size() != n) {
    std::ostringstream msg;
    msg << "expected " << n << " subsystem estimates, got " << est.size();
    throw DimensionError(msg.str());
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (est[i].gains.size() != n) {
      std::ostringstream msg;
      msg << "estimate " << i + 1 << " has " << est[i].gains.size() << " internal gains, expected " << n;
      throw DimensionError(msg.str());
    }
    if (!need_sigma) est[i].beta.validate();
  }
}

void require_solution(const hybrid::SolutionPair& sol, const hybrid::NetworkSpec& net) {
  if (sol.x.samples().empty()) throw Error("empty solution");
  if (sol.x.samples().front().value.size() != net.state_dim())
    throw DimensionError("solution state dimension does not match the network");
}

double apply(const KFun& f, double r) { return f.is_zero() ? 0.0 : f(r); }

// Records one comparison lhs <= rhs into the trajectory result.
void record(TrajectoryResult& res, const hybrid::Sample& s, std::size_t sub, double lhs, double rhs,
            double tolerance) {
  ++res.checks;
  const double ratio = rhs > 0 ? lhs / rhs : (lhs > 0 ? std::numeric_limits<double>::infinity() : 0.0);
  const bool bad = lhs > rhs + tolerance;
  if (bad) res.pass = false;
  if (ratio > res.ratio || res.checks == 1) {
    res.ratio = ratio;
    res.worst_at = {s.t, s.k};
    res.subsystem = sub;
    res.lhs = lhs;
    res.rhs = rhs;
  }
}

enum class Bound { Decay, Sigma };

BatchResult pointwise(const char* property, Bound kind, const std::vector<hybrid::SolutionPair>& sols,
                      const hybrid::NetworkSpec& net, const std::vector<SubsystemEstimate>& est,
                      const std::optional<CompositeEstimate>& composite) {
  require_shapes(net, est, kind == Bound::Sigma);
  if (composite && kind == Bound::Decay) composite->beta.validate();
  const std::size_t n = net.size();
  BatchResult out;
  out.property = property;
  for (std::size_t idx = 0; idx < sols.size(); ++idx) {
    const auto& sol = sols[idx];
    require_solution(sol, net);
    TrajectoryResult res;
    res.label = "trajectory " + std::to_string(idx + 1);
    const auto& xs = sol.x.samples();
    const auto& us = sol.u.samples();
    std::vector<double> x0_block(n), sup_block(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) x0_block[i] = block(xs.front().value, net.offset(i), net.dim(i));
    const double x0_norm = hybrid::max_norm(xs.front().value);
    double sup_u = 0.0;
    for (std::size_t s = 0; s < xs.size(); ++s) {
      const auto& smp = xs[s];
      for (std::size_t i = 0; i < n; ++i)
        sup_block[i] = std::max(sup_block[i], block(smp.value, net.offset(i), net.dim(i)));
      if (s < us.size()) sup_u = std::max(sup_u, hybrid::max_norm(us[s].value));
      const double tk = static_cast<double>(smp.k);
      for (std::size_t i = 0; i < n; ++i) {
        double rhs = kind == Bound::Decay ? est[i].beta(x0_block[i], smp.t, tk) : apply(est[i].sigma, x0_block[i]);
        for (std::size_t j = 0; j < n; ++j)
          if (j != i) rhs = std::max(rhs, apply(est[i].gains[j], sup_block[j]));
        rhs = std::max(rhs, apply(est[i].input_gain, sup_u));
        const double lhs = block(smp.value, net.offset(i), net.dim(i));
        record(res, smp, i, lhs, rhs, kRelativeTolerance * std::max(rhs, 1e-12));
      }
      if (composite) {
        const double first = kind == Bound::Decay ? composite->beta(x0_norm, smp.t, tk) : apply(composite->sigma, x0_norm);
        const double rhs = std::max(first, apply(composite->gamma, sup_u));
        record(res, smp, TrajectoryResult::npos, hybrid::max_norm(smp.value), rhs,
               kRelativeTolerance * std::max(rhs, 1e-12));
      }
    }
    if (!sol.complete()) res.note = "solution left C union D before the horizon";
    out.trajectories.push_back(std::move(res));
  }
  return out;
}

std::vector<std::size_t> tail_indices(const hybrid::SolutionPair& sol, double tail_fraction, double& from) {
  if (!(tail_fraction > 0.0 && tail_fraction < 1.0)) throw Error("tail fraction must lie in (0, 1)");
  const auto& xs = sol.x.samples();
  const double first = xs.front().t + static_cast<double>(xs.front().k);
  const double last = xs.back().t + static_cast<double>(xs.back().k);
  from = first + (1.0 - tail_fraction) * (last - first);
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < xs.size(); ++s)
    if (xs[s].t + static_cast<double>(xs[s].k) >= from) out.push_back(s);
  if (out.empty() || last <= first) throw Error("tail window is empty");
  return out;
}

}  // namespace

BatchResult check_iss(const std::vector<hybrid::SolutionPair>& sols, const hybrid::NetworkSpec& net,
                      const std::vector<SubsystemEstimate>& est, const std::optional<CompositeEstimate>& composite) {
  return pointwise("iss", Bound::Decay, sols, net, est, composite);
}

BatchResult check_pre_gs(const std::vector<hybrid::SolutionPair>& sols, const hybrid::NetworkSpec& net,
                         const std::vector<SubsystemEstimate>& est,
                         const std::optional<CompositeEstimate>& composite) {
  return pointwise("pre_gs", Bound::Sigma, sols, net, est, composite);
}

double tail_max(const hybrid::SolutionPair& sol, double tail_fraction, double* tail_from, std::size_t* tail_samples) {
  if (sol.x.samples().empty()) throw Error("empty solution");
  double from = 0.0;
  const auto idx = tail_indices(sol, tail_fraction, from);
  double m = 0.0;
  for (std::size_t s : idx) m = std::max(m, hybrid::max_norm(sol.x.samples()[s].value));
  if (tail_from) *tail_from = from;
  if (tail_samples) *tail_samples = idx.size();
  return m;
}

BatchResult check_ag(const std::vector<hybrid::SolutionPair>& sols, const hybrid::NetworkSpec& net,
                     const std::vector<SubsystemEstimate>& est, const std::optional<CompositeEstimate>& composite,
                     double tail_fraction) {
  require_shapes(net, est, true);
  const std::size_t n = net.size();
  BatchResult out;
  out.property = "ag";
  for (std::size_t idx = 0; idx < sols.size(); ++idx) {
    const auto& sol = sols[idx];
    require_solution(sol, net);
    if (!sol.complete()) throw Error("asymptotic gain needs a solution that reached the horizon or jump limit");
    TrajectoryResult res;
    res.label = "trajectory " + std::to_string(idx + 1);
    const auto& xs = sol.x.samples();
    const auto tail = tail_indices(sol, tail_fraction, res.tail_from);
    res.tail_samples = tail.size();

    std::vector<double> sup_block(n, 0.0), tail_block(n, 0.0);
    double sup_u = 0.0, tail_all = 0.0;
    for (const auto& s : xs)
      for (std::size_t i = 0; i < n; ++i)
        sup_block[i] = std::max(sup_block[i], block(s.value, net.offset(i), net.dim(i)));
    for (const auto& s : sol.u.samples()) sup_u = std::max(sup_u, hybrid::max_norm(s.value));
    for (std::size_t s : tail) {
      for (std::size_t i = 0; i < n; ++i)
        tail_block[i] = std::max(tail_block[i], block(xs[s].value, net.offset(i), net.dim(i)));
      tail_all = std::max(tail_all, hybrid::max_norm(xs[s].value));
    }
    const auto& at = xs[tail.front()];
    for (std::size_t i = 0; i < n; ++i) {
      double rhs = apply(est[i].input_gain, sup_u);
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) rhs = std::max(rhs, apply(est[i].gains[j], sup_block[j]));
      record(res, at, i, tail_block[i], rhs, kAgTolerance);
    }
    if (composite) record(res, at, TrajectoryResult::npos, tail_all, apply(composite->gamma, sup_u), kAgTolerance);
    res.note = "boundedness is only observed up to the horizon";
    out.trajectories.push_back(std::move(res));
  }
  return out;
}

namespace {

void require_increasing(const std::vector<double>& g, const char* what, bool allow_zero) {
  if (g.empty()) throw Error(std::string(what) + " grid is empty");
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!(g[k] > 0.0 || (allow_zero && g[k] == 0.0)) || !std::isfinite(g[k]))
      throw Error(std::string(what) + " grid must be positive and finite");
    if (k > 0 && !(g[k] > g[k - 1])) throw Error(std::string(what) + " grid must be increasing");
  }
}

}  // namespace

PrestabilityResult check_zero_input_prestability(const hybrid::NetworkSpec& net, const std::vector<double>& delta_grid,
                                                 const std::vector<double>& epsilon_grid,
                                                 const PrestabilityOptions& opt) {
  require_increasing(delta_grid, "delta", false);
  require_increasing(epsilon_grid, "epsilon", false);
  const std::size_t N = net.state_dim();
  const auto u = hybrid::InputSignal::zero(net.input_dim());
  const std::vector<double> u0(net.input_dim(), 0.0);
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, N - 1);

  // Directions on the unit max-norm sphere, shared by every radius.
  std::vector<std::vector<double>> dirs;
  for (std::size_t i = 0; i < N; ++i)
    for (double s : {-1.0, 1.0}) {
      std::vector<double> d(N, 0.0);
      d[i] = s;
      dirs.push_back(std::move(d));
    }
  dirs.push_back(std::vector<double>(N, 1.0));
  dirs.push_back(std::vector<double>(N, -1.0));
  for (std::size_t s = 0; s < opt.directions; ++s) {
    std::vector<double> d(N);
    for (auto& v : d) v = unit(rng);
    d[pick(rng)] = unit(rng) < 0 ? -1.0 : 1.0;
    dirs.push_back(std::move(d));
  }

  PrestabilityResult out;
  out.delta_grid = delta_grid;
  out.epsilon_grid = epsilon_grid;
  std::vector<std::vector<double>> x0s;
  for (double d : delta_grid)
    for (const auto& dir : dirs) {
      std::vector<double> x(dir);
      for (auto& v : x) v *= d;
      x0s.push_back(std::move(x));
    }
  std::vector<double> reach_of(x0s.size(), 0.0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next++) < x0s.size();) {
      const auto& x0 = x0s[k];
      if (!(net.flow_guard(x0, u0) <= 0) && !(net.jump_guard(x0, u0) <= 0)) {
        reach_of[k] = 0.0;  // no solution starts here
        continue;
      }
      try {
        const auto sol = hybrid::simulate(net, x0, u, opt.horizon, opt.max_jumps, opt.sim);
        reach_of[k] = hybrid::running_sup_norm(sol.x).back();
      } catch (const Error&) {
        reach_of[k] = std::numeric_limits<double>::infinity();
      }
    }
  };
  const std::size_t threads = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  double running = 0.0;
  for (std::size_t d = 0; d < delta_grid.size(); ++d) {
    for (std::size_t k = 0; k < dirs.size(); ++k) running = std::max(running, reach_of[d * dirs.size() + k]);
    out.reach.push_back(running);
  }
  for (double eps : epsilon_grid) {
    std::optional<double> best;
    for (std::size_t d = 0; d < delta_grid.size(); ++d)
      if (out.reach[d] <= eps * (1.0 + kRelativeTolerance)) best = delta_grid[d];
    out.delta.push_back(best);
  }
  return out;
}

GainTable fit_empirical_gain(const hybrid::NetworkSpec& net, const std::vector<double>& levels,
                             const GainTableOptions& opt) {
  require_increasing(levels, "input level", true);
  const std::size_t M = net.input_dim();
  std::vector<double> x0 = opt.x0.empty() ? std::vector<double>(net.state_dim(), 0.0) : opt.x0;
  GainTable out;
  double running = 0.0;
  for (double level : levels) {
    double value = std::numeric_limits<double>::quiet_NaN();
    try {
      const auto u = hybrid::InputSignal::constant(std::vector<double>(M, level));
      const auto sol = hybrid::simulate(net, x0, u, opt.horizon, opt.max_jumps, opt.sim);
      value = tail_max(sol, opt.tail_fraction);
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "level " << level << ": " << e.what();
      out.skipped.push_back(msg.str());
      continue;
    }
    running = std::max(running, value);
    out.levels.push_back(level);
    out.raw.push_back(value);
    out.gain.push_back(running);
  }
  return out;
}

std::vector<hybrid::SolutionPair> simulate_batch(const hybrid::NetworkSpec& net,
                                                 const std::vector<std::vector<double>>& x0s,
                                                 const std::vector<hybrid::InputSignal>& inputs, double horizon,
                                                 std::size_t max_jumps, const hybrid::SimOptions& options) {
  if (x0s.size() != inputs.size()) throw DimensionError("one input signal per initial state is required");
  std::vector<hybrid::SolutionPair> out(x0s.size());
  std::vector<std::exception_ptr> errors(x0s.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next++) < x0s.size();) {
      try {
        out[k] = hybrid::simulate(net, x0s[k], inputs[k], horizon, max_jumps, options);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, x0s.size()); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace hsgt::traj
