#include "hsgt/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "hsgt/error.hpp"

namespace hsgt::hybrid {

// ---------------------------------------------------------------------------
// Domains and signals

HybridTimeDomain::HybridTimeDomain(std::vector<Interval> intervals) : intervals_(std::move(intervals)) { validate(); }

HybridTime HybridTimeDomain::end() const {
  if (intervals_.empty()) throw Error("empty hybrid time domain");
  return {intervals_.back().t_end, intervals_.back().k};
}

bool HybridTimeDomain::contains(HybridTime p) const {
  if (p.k >= intervals_.size()) return false;
  const auto& iv = intervals_[p.k];
  return p.t >= iv.t_begin && p.t <= iv.t_end;
}

void HybridTimeDomain::validate() const {
  if (intervals_.empty()) return;
  if (intervals_.front().t_begin != 0.0) throw Error("hybrid time domain must start at t = 0");
  for (std::size_t i = 0; i < intervals_.size(); ++i) {
    const auto& iv = intervals_[i];
    if (iv.k != i) throw Error("jump indices must count up from 0 in steps of one");
    if (!(iv.t_end >= iv.t_begin)) throw Error("interval end precedes its start");
    if (i > 0 && iv.t_begin != intervals_[i - 1].t_end) throw Error("intervals must join at jump times");
  }
}

void HybridSignal::append(double t, std::size_t k, std::vector<double> value) {
  if (value.size() != dim_) throw DimensionError("sample dimension mismatch");
  if (samples_.empty()) {
    if (t != 0.0 || k != 0) throw Error("a hybrid signal starts at (0, 0)");
  } else {
    const auto& last = samples_.back();
    const bool flow = k == last.k && t > last.t;
    const bool jump = k == last.k + 1 && t == last.t;
    if (!flow && !jump) throw Error("sample does not extend the hybrid time domain");
  }
  samples_.push_back({t, k, std::move(value)});
}

HybridTimeDomain HybridSignal::domain() const {
  std::vector<Interval> out;
  for (const auto& s : samples_) {
    if (out.empty() || out.back().k != s.k) {
      out.push_back({s.t, s.t, s.k});
    } else {
      out.back().t_end = s.t;
    }
  }
  return HybridTimeDomain(std::move(out));
}

std::vector<double> HybridSignal::at(HybridTime p) const {
  auto first = std::lower_bound(samples_.begin(), samples_.end(), p.k,
                                [](const Sample& s, std::size_t k) { return s.k < k; });
  if (first == samples_.end() || first->k != p.k || p.t < first->t) throw Error("time outside the signal domain");
  for (auto it = first; it != samples_.end() && it->k == p.k; ++it) {
    if (it->t == p.t) return it->value;
    auto next = it + 1;
    if (next == samples_.end() || next->k != p.k) break;
    if (p.t < next->t) {
      const double w = (p.t - it->t) / (next->t - it->t);
      std::vector<double> v(dim_);
      for (std::size_t i = 0; i < dim_; ++i) v[i] = (1 - w) * it->value[i] + w * next->value[i];
      return v;
    }
  }
  throw Error("time outside the signal domain");
}

double max_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double sup_norm(const HybridSignal& s, HybridTime upto) {
  if (!s.domain().contains(upto)) throw Error("(t, k) outside the signal domain");
  double m = 0.0;
  // t + k strictly increases along the samples.
  for (const auto& sample : s.samples()) {
    if (!precedes_or_equal({sample.t, sample.k}, upto)) break;
    m = std::max(m, max_norm(sample.value));
  }
  return m;
}

std::vector<double> running_sup_norm(const HybridSignal& s) {
  std::vector<double> out;
  out.reserve(s.size());
  double m = 0.0;
  for (const auto& sample : s.samples()) {
    m = std::max(m, max_norm(sample.value));
    out.push_back(m);
  }
  return out;
}

HybridSignal restrict(const HybridSignal& s, HybridTime from, HybridTime to) {
  const auto dom = s.domain();
  if (!dom.contains(from) || !dom.contains(to)) throw Error("restriction window outside the signal domain");
  if (!precedes_or_equal(from, to)) throw Error("restriction window is reversed");
  HybridSignal out(s.dimension());
  for (const auto& sample : s.samples()) {
    const HybridTime p{sample.t, sample.k};
    const bool inside = precedes_or_equal(from, p) && precedes_or_equal(p, to);
    out.append(sample.t, sample.k, inside ? sample.value : std::vector<double>(s.dimension(), 0.0));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Networks

std::vector<std::string> state_names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= n; ++i) out.push_back("x" + std::to_string(i));
  return out;
}

std::vector<std::string> input_names(std::size_t m) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= m; ++i) out.push_back("u" + std::to_string(i));
  return out;
}

namespace {

void check_names(const expr::Expr& e, const std::vector<std::string>& vars) {
  for (const auto& name : e.free_variables())
    if (std::find(vars.begin(), vars.end(), name) == vars.end()) throw UnknownIdentifier(name);
}

}  // namespace

NetworkSpec compose_network(std::vector<SubsystemSpec> subsystems, std::size_t input_dim) {
  if (subsystems.empty()) throw Error("a network needs at least one subsystem");
  NetworkSpec net;
  net.input_dim_ = input_dim;
  for (const auto& s : subsystems) {
    if (s.dim == 0) throw DimensionError("subsystem '" + s.name + "' has dimension 0");
    if (s.flow.size() != s.dim || s.jump.size() != s.dim)
      throw DimensionError("subsystem '" + s.name + "' needs " + std::to_string(s.dim) + " flow and jump components");
    net.offsets_.push_back(net.state_dim_);
    net.state_dim_ += s.dim;
  }
  net.variables_ = state_names(net.state_dim_);
  for (auto& v : input_names(input_dim)) net.variables_.push_back(std::move(v));

  for (const auto& s : subsystems) {
    NetworkSpec::Compiled c;
    for (const auto& e : s.flow) {
      check_names(e, net.variables_);
      c.flow.emplace_back(e, net.variables_);
    }
    for (const auto& e : s.jump) {
      check_names(e, net.variables_);
      c.jump.emplace_back(e, net.variables_);
    }
    if (s.flow_set) {
      check_names(*s.flow_set, net.variables_);
      c.flow_set.emplace(*s.flow_set, net.variables_);
    }
    if (s.jump_set) {
      check_names(*s.jump_set, net.variables_);
      c.jump_set.emplace(*s.jump_set, net.variables_);
    }
    net.compiled_.push_back(std::move(c));
  }
  net.subsystems_ = std::move(subsystems);

  // Jump sets agree when the guards are structurally identical; otherwise
  // membership is compared on a fixed pseudo-random sample of a box.
  const auto& first = net.subsystems_.front().jump_set;
  bool structural = true;
  for (const auto& s : net.subsystems_) {
    if (s.jump_set.has_value() != first.has_value() || (first && !(*s.jump_set == *first))) structural = false;
  }
  bool equal = structural;
  if (!structural) {
    equal = true;
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> box(-10.0, 10.0);
    for (int trial = 0; trial < 4096 && equal; ++trial) {
      std::vector<double> x(net.state_dim_), u(input_dim);
      // Mix in smaller boxes so that guards near the origin are resolved.
      const double scale = std::pow(10.0, -static_cast<double>(trial % 3));
      for (auto& v : x) v = scale * box(rng);
      for (auto& v : u) v = scale * box(rng);
      bool ref = false;
      for (std::size_t i = 0; i < net.size(); ++i) {
        bool in = false;
        try {
          in = net.jump_guard(i, x, u) <= 0.0;
        } catch (const DomainError&) {
          equal = false;
          break;
        }
        if (i == 0) ref = in;
        else if (in != ref) equal = false;
      }
    }
  }
  net.jump_sets_equal_ = equal;
  if (!equal) {
    net.warnings_.push_back(
        "jump sets D_i differ between subsystems; the small-gain stability results assume D_i = D for all i, and "
        "states of subsystems outside their own D_i stay frozen across jumps of the others");
  }
  return net;
}

SubsystemSpec parse_subsystem(std::string name, const std::vector<std::string>& flow,
                              const std::vector<std::string>& jump, const std::string& flow_set,
                              const std::string& jump_set, std::size_t state_dim, std::size_t input_dim) {
  auto vars = state_names(state_dim);
  for (auto& v : input_names(input_dim)) vars.push_back(std::move(v));
  SubsystemSpec s;
  s.name = std::move(name);
  s.dim = flow.size();
  for (const auto& f : flow) s.flow.push_back(expr::parse_expr(f, vars));
  for (const auto& g : jump) s.jump.push_back(expr::parse_expr(g, vars));
  if (!flow_set.empty()) s.flow_set = expr::parse_expr(flow_set, vars);
  if (!jump_set.empty()) s.jump_set = expr::parse_expr(jump_set, vars);
  return s;
}

std::vector<double> NetworkSpec::pack(const std::vector<double>& x, const std::vector<double>& u) const {
  if (x.size() != state_dim_) throw DimensionError("state has length " + std::to_string(x.size()) + ", expected " +
                                                   std::to_string(state_dim_));
  if (u.size() != input_dim_) throw DimensionError("input has length " + std::to_string(u.size()) + ", expected " +
                                                   std::to_string(input_dim_));
  std::vector<double> buf(x);
  buf.insert(buf.end(), u.begin(), u.end());
  return buf;
}

std::vector<double> NetworkSpec::flow(const std::vector<double>& x, const std::vector<double>& u) const {
  const auto buf = pack(x, u);
  std::vector<double> out;
  out.reserve(state_dim_);
  for (const auto& c : compiled_)
    for (const auto& f : c.flow) out.push_back(f(buf));
  return out;
}

std::vector<double> NetworkSpec::flow(std::size_t i, const std::vector<double>& x,
                                      const std::vector<double>& u) const {
  const auto buf = pack(x, u);
  std::vector<double> out;
  for (const auto& f : compiled_.at(i).flow) out.push_back(f(buf));
  return out;
}

std::vector<double> NetworkSpec::jump(std::size_t i, const std::vector<double>& x,
                                      const std::vector<double>& u) const {
  const auto buf = pack(x, u);
  std::vector<double> out;
  for (const auto& g : compiled_.at(i).jump) out.push_back(g(buf));
  return out;
}

std::vector<double> NetworkSpec::jump(const std::vector<double>& x, const std::vector<double>& u,
                                      double tolerance) const {
  const auto buf = pack(x, u);
  std::vector<double> out(x);
  for (std::size_t i = 0; i < compiled_.size(); ++i) {
    const auto& c = compiled_[i];
    if (!c.jump_set || !((*c.jump_set)(buf) <= tolerance)) continue;
    for (std::size_t r = 0; r < c.jump.size(); ++r) out[offsets_[i] + r] = c.jump[r](buf);
  }
  return out;
}

double NetworkSpec::flow_guard(std::size_t i, const std::vector<double>& x, const std::vector<double>& u) const {
  const auto& c = compiled_.at(i);
  if (!c.flow_set) return -std::numeric_limits<double>::infinity();
  return (*c.flow_set)(pack(x, u));
}

double NetworkSpec::jump_guard(std::size_t i, const std::vector<double>& x, const std::vector<double>& u) const {
  const auto& c = compiled_.at(i);
  if (!c.jump_set) return std::numeric_limits<double>::infinity();
  return (*c.jump_set)(pack(x, u));
}

double NetworkSpec::flow_guard(const std::vector<double>& x, const std::vector<double>& u) const {
  double g = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < size(); ++i) g = std::max(g, flow_guard(i, x, u));
  return g;
}

double NetworkSpec::jump_guard(const std::vector<double>& x, const std::vector<double>& u) const {
  double g = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < size(); ++i) g = std::min(g, jump_guard(i, x, u));
  return g;
}

// ---------------------------------------------------------------------------
// Inputs

InputSignal InputSignal::custom(std::size_t m, std::function<std::vector<double>(double, std::size_t)> f,
                                std::string description) {
  InputSignal s;
  s.dim_ = m;
  s.fn_ = std::move(f);
  s.description_ = std::move(description);
  return s;
}

InputSignal InputSignal::zero(std::size_t m) {
  return custom(m, [m](double, std::size_t) { return std::vector<double>(m, 0.0); }, "zero");
}

InputSignal InputSignal::constant(std::vector<double> value) {
  std::ostringstream d;
  d.precision(17);
  d << "constant (";
  for (std::size_t i = 0; i < value.size(); ++i) d << (i ? ", " : "") << value[i];
  d << ")";
  const std::size_t m = value.size();
  return custom(m, [value = std::move(value)](double, std::size_t) { return value; }, d.str());
}

InputSignal InputSignal::expressions(std::vector<expr::Expr> components) {
  const std::vector<std::string> slots{"t", "k"};
  std::vector<expr::CompiledExpr> compiled;
  std::string desc = "(";
  for (std::size_t i = 0; i < components.size(); ++i) {
    check_names(components[i], slots);
    compiled.emplace_back(components[i], slots);
    desc += (i ? ", " : "") + components[i].render();
  }
  desc += ")";
  const std::size_t m = components.size();
  return custom(
      m,
      [compiled = std::move(compiled)](double t, std::size_t k) {
        const double args[] = {t, static_cast<double>(k)};
        std::vector<double> out;
        out.reserve(compiled.size());
        for (const auto& c : compiled) out.push_back(c(args));
        return out;
      },
      desc);
}

InputSignal InputSignal::table(std::vector<double> times, std::vector<std::vector<double>> values) {
  if (times.empty() || times.size() != values.size()) throw DimensionError("input table needs matching rows");
  const std::size_t m = values.front().size();
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (values[i].size() != m) throw DimensionError("input table rows differ in width");
    if (i > 0 && !(times[i] > times[i - 1])) throw Error("input table times must increase");
  }
  return custom(
      m,
      [times = std::move(times), values = std::move(values)](double t, std::size_t) {
        auto it = std::upper_bound(times.begin(), times.end(), t);
        const std::size_t idx = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
        return values[idx];
      },
      "piecewise-constant table");
}

// ---------------------------------------------------------------------------
// Simulation

std::string to_string(Termination t) {
  switch (t) {
    case Termination::HorizonReached: return "horizon";
    case Termination::MaxJumps: return "max_jumps";
    case Termination::LeftSets: return "left_C_union_D";
  }
  return "horizon";
}

namespace {

void require_finite(const std::vector<double>& x, double t, std::size_t k) {
  for (double v : x) {
    if (!std::isfinite(v)) {
      std::ostringstream msg;
      msg << "non-finite state at (t, k) = (" << t << ", " << k << ")";
      throw Error(msg.str());
    }
  }
}

std::vector<double> rk4_step(const NetworkSpec& net, const InputSignal& u, double t, std::size_t k,
                             const std::vector<double>& x, double h) {
  const std::size_t n = x.size();
  auto axpy = [n](const std::vector<double>& a, double c, const std::vector<double>& b) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + c * b[i];
    return out;
  };
  const auto k1 = net.flow(x, u(t, k));
  const auto k2 = net.flow(axpy(x, h / 2, k1), u(t + h / 2, k));
  const auto k3 = net.flow(axpy(x, h / 2, k2), u(t + h / 2, k));
  const auto k4 = net.flow(axpy(x, h, k3), u(t + h, k));
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  return out;
}

}  // namespace

SolutionPair simulate(const NetworkSpec& net, const std::vector<double>& x0, const InputSignal& u, double horizon,
                      std::size_t max_jumps, const SimOptions& opt) {
  if (x0.size() != net.state_dim()) throw DimensionError("initial state has the wrong length");
  if (u.dimension() != net.input_dim()) throw DimensionError("input signal has the wrong dimension");
  if (!(horizon > 0) && max_jumps == 0) throw Error("need a positive horizon or a positive jump budget");
  if (!(opt.step > 0) || !(opt.event_tolerance > 0)) throw Error("step and event tolerance must be positive");

  const double gtol = opt.guard_tolerance;
  auto in_c = [&](const std::vector<double>& x, const std::vector<double>& v) {
    return net.flow_guard(x, v) <= gtol;
  };
  auto in_d = [&](const std::vector<double>& x, const std::vector<double>& v) {
    return net.jump_guard(x, v) <= gtol;
  };

  SolutionPair sol{HybridSignal(net.state_dim()), HybridSignal(net.input_dim()), Termination::HorizonReached};
  double t = 0.0;
  std::size_t k = 0;
  std::vector<double> x = x0;
  require_finite(x, t, k);
  {
    const auto u0 = u(t, k);
    if (!in_c(x, u0) && !in_d(x, u0)) throw Error("initial point lies outside C and D");
    sol.x.append(t, k, x);
    sol.u.append(t, k, u0);
  }

  while (true) {
    const auto ut = u(t, k);
    const bool c = in_c(x, ut), d = in_d(x, ut);
    if (d && (opt.priority == Priority::Jump || !c)) {
      if (k >= max_jumps) {
        sol.reason = Termination::MaxJumps;
        break;
      }
      x = net.jump(x, ut, gtol);
      ++k;
      require_finite(x, t, k);
      sol.x.append(t, k, x);
      sol.u.append(t, k, u(t, k));
      continue;
    }
    if (!c) {
      sol.reason = Termination::LeftSets;
      break;
    }
    if (!(horizon > t)) {
      sol.reason = Termination::HorizonReached;
      break;
    }

    // One flow step, shortened to land exactly on the horizon.
    double h = opt.step;
    const bool last_step = t + h >= horizon;
    if (last_step) h = horizon - t;
    // Flowing stops where the state leaves C or, under jump priority, enters D.
    auto must_stop = [&](const std::vector<double>& y, double s) {
      const auto us = u(s, k);
      return !in_c(y, us) || (opt.priority == Priority::Jump && in_d(y, us));
    };
    auto y = rk4_step(net, u, t, k, x, h);
    require_finite(y, t + h, k);
    double t_next = last_step ? horizon : t + h;
    if (must_stop(y, t_next)) {
      double lo = 0.0, hi = h;
      while (hi - lo > opt.event_tolerance) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (must_stop(rk4_step(net, u, t, k, x, mid), t + mid)) hi = mid;
        else lo = mid;
      }
      y = rk4_step(net, u, t, k, x, hi);
      t_next = t + hi;
    }
    if (!(t_next > t)) {
      // Below the resolution of t; no flow is possible from here.
      sol.reason = Termination::LeftSets;
      break;
    }
    t = t_next;
    x = std::move(y);
    sol.x.append(t, k, x);
    sol.u.append(t, k, u(t, k));
  }
  return sol;
}

void write_csv(std::ostream& out, const SolutionPair& sol) {
  const std::size_t n = sol.x.dimension(), m = sol.u.dimension();
  out << "t,k";
  for (std::size_t i = 1; i <= n; ++i) out << ",x_" << i;
  for (std::size_t i = 1; i <= m; ++i) out << ",u_" << i;
  out << ",phase\n";
  char buf[64];
  for (std::size_t r = 0; r < sol.x.size(); ++r) {
    const auto& xs = sol.x[r];
    const auto& us = sol.u[r];
    std::snprintf(buf, sizeof buf, "%.17g", xs.t);
    out << buf << ',' << xs.k;
    for (double v : xs.value) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    for (double v : us.value) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << ',' << (sol.x.is_pre_jump(r) || sol.x.is_post_jump(r) ? "jump" : "flow") << '\n';
  }
}

}  // namespace hsgt::hybrid
