#include "hsgt/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

namespace hsgt::cli {

using json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Config parsing

[[noreturn]] void fail(const std::string& where, const std::string& what) { throw ConfigError(where + ": " + what); }

const json& need(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) fail(where + "." + key, "missing");
  return obj.at(key);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

std::size_t count(const json& j, const std::string& where) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) fail(where, "expected a nonnegative integer");
  const auto v = j.get<long long>();
  if (v < 0) fail(where, "expected a nonnegative integer");
  return static_cast<std::size_t>(v);
}

std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "expected a string");
  return j.get<std::string>();
}

std::vector<double> vec(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(number(j[k], where + "[" + std::to_string(k) + "]"));
  return out;
}

template <class T>
T get_or(const json& obj, const std::string& key, T fallback, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  const auto& j = obj.at(key);
  const std::string at = where + "." + key;
  if constexpr (std::is_same_v<T, double>) {
    return number(j, at);
  } else if constexpr (std::is_same_v<T, std::size_t>) {
    return count(j, at);
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    return static_cast<std::uint64_t>(count(j, at));
  } else if constexpr (std::is_same_v<T, std::string>) {
    return text(j, at);
  } else if constexpr (std::is_same_v<T, std::vector<double>>) {
    return vec(j, at);
  } else {
    static_assert(sizeof(T) == 0, "unsupported config type");
  }
}

// "0" (or an empty string) is the zero function.
KFun parse_kfun(const std::string& s, const std::string& where) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos || s.substr(first, s.find_last_not_of(" \t") - first + 1) == "0")
    return KFun::zero();
  try {
    return KFun::parse(s);
  } catch (const Error& e) {
    fail(where, e.what());
  }
}

KFun kfun_at(const json& obj, const std::string& key, const std::string& where, std::optional<KFun> fallback) {
  if (!obj.is_object() || !obj.contains(key)) {
    if (fallback) return *fallback;
    fail(where + "." + key, "missing");
  }
  return parse_kfun(text(obj.at(key), where + "." + key), where + "." + key);
}

kfun::Grid parse_grid(const json& j, kfun::Grid g, const std::string& where) {
  g.lo = get_or(j, "lo", g.lo, where);
  g.hi = get_or(j, "hi", g.hi, where);
  g.points = get_or(j, "points", g.points, where);
  if (!(g.lo > 0) || !(g.hi > g.lo) || g.points < 2) fail(where, "grid needs 0 < lo < hi and points >= 2");
  return g;
}

hybrid::NetworkSpec parse_network(const json& root) {
  const auto& net = need(root, "network", "$");
  const std::size_t n = count(need(net, "state_dim", "network"), "network.state_dim");
  const std::size_t m = get_or<std::size_t>(net, "input_dim", 0, "network");
  const auto& subs = need(net, "subsystems", "network");
  if (!subs.is_array() || subs.empty()) fail("network.subsystems", "expected a nonempty array");
  std::vector<hybrid::SubsystemSpec> specs;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    const std::string where = "network.subsystems[" + std::to_string(i) + "]";
    const auto& s = subs[i];
    auto strings = [&](const char* key) {
      const auto& arr = need(s, key, where);
      if (!arr.is_array()) fail(where + "." + key, "expected an array of expressions");
      std::vector<std::string> out;
      for (std::size_t k = 0; k < arr.size(); ++k)
        out.push_back(text(arr[k], where + "." + key + "[" + std::to_string(k) + "]"));
      return out;
    };
    const auto flow = strings("flow");
    const auto jump = strings("jump");
    const std::string name = get_or<std::string>(s, "name", "S" + std::to_string(i + 1), where);
    try {
      specs.push_back(hybrid::parse_subsystem(name, flow, jump, get_or<std::string>(s, "flow_set", "", where),
                                              get_or<std::string>(s, "jump_set", "", where), n, m));
    } catch (const Error& e) {
      fail(where, e.what());
    }
  }
  try {
    return hybrid::compose_network(std::move(specs), m);
  } catch (const Error& e) {
    fail("network", e.what());
  }
}

hybrid::InputSignal parse_input(const json& j, std::size_t m, const std::string& where) {
  if (j.is_null()) return hybrid::InputSignal::zero(m);
  if (!j.is_object()) fail(where, "expected an object");
  hybrid::InputSignal u;
  try {
    if (j.contains("constant")) {
      u = hybrid::InputSignal::constant(vec(j.at("constant"), where + ".constant"));
    } else if (j.contains("expressions")) {
      std::vector<expr::Expr> comps;
      const auto& arr = j.at("expressions");
      if (!arr.is_array()) fail(where + ".expressions", "expected an array of expressions");
      for (std::size_t k = 0; k < arr.size(); ++k)
        comps.push_back(expr::parse_expr(text(arr[k], where + ".expressions"), {"t", "k"}));
      u = hybrid::InputSignal::expressions(std::move(comps));
    } else if (j.contains("table")) {
      const auto& t = j.at("table");
      std::vector<std::vector<double>> values;
      const auto& vs = need(t, "values", where + ".table");
      if (!vs.is_array()) fail(where + ".table.values", "expected an array of vectors");
      for (std::size_t k = 0; k < vs.size(); ++k) values.push_back(vec(vs[k], where + ".table.values"));
      u = hybrid::InputSignal::table(vec(need(t, "times", where + ".table"), where + ".table.times"),
                                     std::move(values));
    } else {
      return hybrid::InputSignal::zero(m);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail(where, e.what());
  }
  if (u.dimension() != m) fail(where, "input has dimension " + std::to_string(u.dimension()) +
                                          ", the network expects " + std::to_string(m));
  return u;
}

traj::Beta parse_beta(const json& j, const std::string& where) {
  traj::Beta b;
  b.M = get_or(j, "M", b.M, where);
  b.c = get_or(j, "c", b.c, where);
  try {
    b.validate();
  } catch (const Error& e) {
    fail(where, e.what());
  }
  return b;
}

void parse_trajectories(const json& a, ProjectConfig& cfg) {
  const std::string where = "analysis.trajectories";
  const auto& t = a.at("trajectories");
  TrajectoryConfig tc;
  const std::size_t n = cfg.network.size(), N = cfg.network.state_dim();
  if (t.contains("properties")) {
    const auto& ps = t.at("properties");
    if (!ps.is_array()) fail(where + ".properties", "expected an array");
    for (const auto& p : ps) {
      const auto s = text(p, where + ".properties");
      if (s != "iss" && s != "pre_gs" && s != "ag") fail(where + ".properties", "unknown property '" + s + "'");
      tc.properties.push_back(s);
    }
  }
  if (t.contains("initial_conditions")) {
    const auto& ics = t.at("initial_conditions");
    if (!ics.is_array()) fail(where + ".initial_conditions", "expected an array of states");
    for (std::size_t k = 0; k < ics.size(); ++k) {
      const std::string at = where + ".initial_conditions[" + std::to_string(k) + "]";
      auto x = vec(ics[k], at);
      if (x.size() != N) fail(at, "expected " + std::to_string(N) + " components");
      tc.initial_conditions.push_back(std::move(x));
    }
  }
  tc.input_levels = get_or(t, "input_levels", std::vector<double>{0.0}, where);
  tc.horizon = get_or(t, "horizon", tc.horizon, where);
  tc.max_jumps = get_or(t, "max_jumps", tc.max_jumps, where);
  tc.tail_fraction = get_or(t, "tail_fraction", tc.tail_fraction, where);
  tc.gain_levels = get_or(t, "gain_levels", std::vector<double>{}, where);
  tc.delta_grid = get_or(t, "delta_grid", std::vector<double>{}, where);
  tc.epsilon_grid = get_or(t, "epsilon_grid", std::vector<double>{}, where);

  const json none = json::object();
  const json& ests = t.contains("estimates") ? t.at("estimates") : none;
  if (!ests.is_array() && !ests.is_object()) fail(where + ".estimates", "expected an array");
  if (ests.is_array() && ests.size() != n)
    fail(where + ".estimates", "expected one entry per subsystem (" + std::to_string(n) + ")");
  for (std::size_t i = 0; i < n; ++i) {
    const std::string at = where + ".estimates[" + std::to_string(i) + "]";
    const json& e = ests.is_array() ? ests[i] : none;
    traj::SubsystemEstimate est;
    est.beta = e.contains("beta") ? parse_beta(e.at("beta"), at + ".beta") : traj::Beta{};
    est.sigma = kfun_at(e, "sigma", at, KFun::identity());
    if (e.contains("gains")) {
      const auto& g = e.at("gains");
      if (!g.is_array() || g.size() != n) fail(at + ".gains", "expected " + std::to_string(n) + " entries");
      for (std::size_t j = 0; j < n; ++j)
        est.gains.push_back(parse_kfun(text(g[j], at + ".gains"), at + ".gains[" + std::to_string(j) + "]"));
    } else if (cfg.gains) {
      for (std::size_t j = 0; j < n; ++j) est.gains.push_back((*cfg.gains)(i, j));
    } else {
      fail(at + ".gains", "missing and no gains section to fall back on");
    }
    est.input_gain = kfun_at(e, "input_gain", at,
                             cfg.external_gains.empty() ? std::optional<KFun>{} : cfg.external_gains[i]);
    tc.estimates.push_back(std::move(est));
  }
  if (t.contains("composite")) {
    const auto& c = t.at("composite");
    const std::string at = where + ".composite";
    traj::CompositeEstimate ce;
    ce.beta = c.contains("beta") ? parse_beta(c.at("beta"), at + ".beta") : traj::Beta{};
    ce.sigma = kfun_at(c, "sigma", at, KFun::identity());
    ce.gamma = kfun_at(c, "gamma", at, std::nullopt);
    tc.composite = ce;
  }
  cfg.trajectories = std::move(tc);
}

}  // namespace

void apply_seed(ProjectConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.sampler.seed = seed;
  cfg.small_gain.seed = seed;
}

ProjectConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("$: invalid JSON: ") + e.what());
  }
  if (!root.is_object()) fail("$", "expected an object");
  ProjectConfig cfg;
  cfg.network = parse_network(root);
  const std::size_t n = cfg.network.size(), N = cfg.network.state_dim();

  if (root.contains("gains")) {
    const auto& g = root.at("gains");
    const auto& internal = need(g, "internal", "gains");
    if (!internal.is_array() || internal.size() != n)
      fail("gains.internal", "expected a " + std::to_string(n) + " x " + std::to_string(n) + " matrix");
    gain::GainMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!internal[i].is_array() || internal[i].size() != n)
        fail("gains.internal[" + std::to_string(i) + "]", "expected " + std::to_string(n) + " entries");
      for (std::size_t j = 0; j < n; ++j) {
        const std::string at = "gains.internal[" + std::to_string(i) + "][" + std::to_string(j) + "]";
        const auto f = parse_kfun(text(internal[i][j], at), at);
        try {
          m.set(i, j, f);
        } catch (const Error& e) {
          fail(at, e.what());
        }
      }
    }
    cfg.gains = std::move(m);
    if (g.contains("external")) {
      const auto& ext = g.at("external");
      if (!ext.is_array() || ext.size() != n) fail("gains.external", "expected " + std::to_string(n) + " entries");
      for (std::size_t i = 0; i < n; ++i) {
        const std::string at = "gains.external[" + std::to_string(i) + "]";
        cfg.external_gains.push_back(parse_kfun(text(ext[i], at), at));
      }
    } else {
      cfg.external_gains.assign(n, KFun::zero());
    }
  }

  if (root.contains("lyapunov")) {
    const auto& ly = root.at("lyapunov");
    if (!ly.is_array() || ly.size() != n)
      fail("lyapunov", "expected one candidate per subsystem (" + std::to_string(n) + ")");
    if (!cfg.gains) fail("gains", "missing; Lyapunov candidates need the gain matrix");
    const auto names = hybrid::state_names(N);
    for (std::size_t i = 0; i < n; ++i) {
      const std::string at = "lyapunov[" + std::to_string(i) + "]";
      lyapunov::SubsystemLyapunov c;
      const auto v = text(need(ly[i], "V", at), at + ".V");
      try {
        c.V = expr::parse_expr(v, names);
      } catch (const Error& e) {
        fail(at + ".V", e.what());
      }
      c.psi1 = kfun_at(ly[i], "psi1", at, std::nullopt);
      c.psi2 = kfun_at(ly[i], "psi2", at, std::nullopt);
      c.alpha = kfun_at(ly[i], "alpha", at, std::nullopt);
      c.lambda = kfun_at(ly[i], "lambda", at, std::nullopt);
      for (std::size_t j = 0; j < n; ++j) c.gains.push_back((*cfg.gains)(i, j));
      c.input_gain = cfg.external_gains[i];
      cfg.candidates.push_back(std::move(c));
    }
  }

  const json none = json::object();
  const json& a = root.contains("analysis") ? root.at("analysis") : none;
  if (!a.is_object()) fail("analysis", "expected an object");
  if (a.contains("grid")) cfg.grid = parse_grid(a.at("grid"), cfg.grid, "analysis.grid");
  cfg.equiv.grid = cfg.grid;
  cfg.anchor = get_or(a, "anchor", std::vector<double>(n, 1.0), "analysis");
  if (cfg.anchor.size() != n) fail("analysis.anchor", "expected " + std::to_string(n) + " entries");
  if (a.contains("small_gain")) {
    const auto& s = a.at("small_gain");
    const std::string at = "analysis.small_gain";
    if (s.contains("grid")) cfg.small_gain.grid = parse_grid(s.at("grid"), cfg.small_gain.grid, at + ".grid");
    cfg.small_gain.strictness = get_or(s, "strictness", cfg.small_gain.strictness, at);
    cfg.small_gain.random_directions = get_or(s, "random_directions", cfg.small_gain.random_directions, at);
    cfg.small_gain.max_cycle_nodes = get_or(s, "max_cycle_nodes", cfg.small_gain.max_cycle_nodes, at);
  }
  if (a.contains("sampler")) {
    const auto& s = a.at("sampler");
    const std::string at = "analysis.sampler";
    cfg.sampler.count = get_or(s, "count", cfg.sampler.count, at);
    cfg.sampler.state_radius = get_or(s, "state_radius", cfg.sampler.state_radius, at);
    cfg.sampler.input_radius = get_or(s, "input_radius", cfg.sampler.input_radius, at);
    cfg.sampler.uniform_fraction = get_or(s, "uniform_fraction", cfg.sampler.uniform_fraction, at);
    if (!(cfg.sampler.state_radius > 0) || cfg.sampler.input_radius < 0 || cfg.sampler.count == 0)
      fail(at, "needs count > 0, state_radius > 0 and input_radius >= 0");
  }
  if (a.contains("equiv")) {
    const auto& s = a.at("equiv");
    const std::string at = "analysis.equiv";
    cfg.equiv.fit_radii = get_or(s, "fit_radii", cfg.equiv.fit_radii, at);
    cfg.equiv.fit_low = get_or(s, "fit_low", cfg.equiv.fit_low, at);
    cfg.equiv.sphere_samples = get_or(s, "sphere_samples", cfg.equiv.sphere_samples, at);
    cfg.equiv.input_levels = get_or(s, "input_levels", cfg.equiv.input_levels, at);
  }
  if (a.contains("solver")) {
    const auto& s = a.at("solver");
    const std::string at = "analysis.solver";
    cfg.sim.step = get_or(s, "step", cfg.sim.step, at);
    cfg.sim.event_tolerance = get_or(s, "event_tolerance", cfg.sim.event_tolerance, at);
    const auto p = get_or<std::string>(s, "priority", "jump", at);
    if (p != "jump" && p != "flow") fail(at + ".priority", "expected \"jump\" or \"flow\"");
    cfg.sim.priority = p == "jump" ? hybrid::Priority::Jump : hybrid::Priority::Flow;
    if (!(cfg.sim.step > 0)) fail(at + ".step", "must be positive");
  }
  if (a.contains("simulation")) {
    const auto& s = a.at("simulation");
    const std::string at = "analysis.simulation";
    SimulationConfig sc;
    sc.x0 = get_or(s, "x0", std::vector<double>(N, 0.0), at);
    if (sc.x0.size() != N) fail(at + ".x0", "expected " + std::to_string(N) + " components");
    sc.input = parse_input(s.contains("input") ? s.at("input") : json(), cfg.network.input_dim(), at + ".input");
    sc.horizon = get_or(s, "horizon", sc.horizon, at);
    sc.max_jumps = get_or(s, "max_jumps", sc.max_jumps, at);
    cfg.simulation = std::move(sc);
  }
  apply_seed(cfg, get_or<std::uint64_t>(a, "seed", 1, "analysis"));
  if (a.contains("trajectories")) parse_trajectories(a, cfg);
  return cfg;
}

ProjectConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

namespace {

// ---------------------------------------------------------------------------
// Reports

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json kfun_json(const KFun& f) {
  json j;
  j["description"] = f.is_zero() ? std::string("0") : f.describe();
  json samples = json::array();
  for (double r : {0.01, 0.1, 1.0, 10.0, 100.0}) samples.push_back({r, number_or_null(f.is_zero() ? 0.0 : f(r))});
  j["samples"] = samples;
  return j;
}

json vector_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(number_or_null(x));
  return out;
}

json index_json(const std::vector<std::size_t>& v) {
  json out = json::array();
  for (auto i : v) out.push_back(i + 1);
  return out;
}

json witness_json(const gain::CycleWitness& w) {
  return {{"cycle", index_json(w.cycle)}, {"radius", w.radius}, {"composed", number_or_null(w.composed)}};
}

json verdict_json(const gain::SmallGainVerdict& v) {
  json j;
  j["status"] = gain::to_string(v.status);
  j["cycle_method_ran"] = v.cycle_method_ran;
  j["cycles_checked"] = v.cycles_checked;
  j["worst_cycle_ratio"] = number_or_null(v.worst_cycle_ratio);
  j["worst_cycle"] = v.worst_cycle ? witness_json(*v.worst_cycle) : json(nullptr);
  j["vector_witness"] = v.vector_witness ? vector_json(*v.vector_witness) : json(nullptr);
  j["cycle_witness"] = v.cycle_witness ? witness_json(*v.cycle_witness) : json(nullptr);
  j["methods_disagree"] = v.methods_disagree;
  j["note"] = v.note;
  return j;
}

json report_json(const lyapunov::VerificationReport& r) {
  json j;
  j["subject"] = r.subject;
  j["verdict"] = lyapunov::to_string(r.verdict());
  json conds = json::array();
  for (const auto& c : r.conditions) {
    json cj;
    cj["id"] = c.id;
    cj["verdict"] = lyapunov::to_string(c.verdict);
    cj["tested"] = c.tested;
    cj["violation_count"] = c.violation_count;
    cj["min_margin"] = number_or_null(c.min_margin);
    cj["empirical"] = number_or_null(c.empirical);
    cj["note"] = c.note;
    json vs = json::array();
    for (const auto& v : c.violations)
      vs.push_back({{"x", vector_json(v.x)}, {"u", vector_json(v.u)}, {"measured", number_or_null(v.measured)},
                    {"bound", number_or_null(v.bound)}});
    cj["violations"] = vs;
    conds.push_back(cj);
  }
  j["conditions"] = conds;
  return j;
}

json certificate_json(const lyapunov::CompositeCertificate& c) {
  json j;
  json sig = json::array();
  for (const auto& s : c.sigma.sigma) sig.push_back(kfun_json(s));
  j["sigma"] = sig;
  j["anchor"] = vector_json(c.sigma.anchor);
  j["inflation"] = c.sigma.inflation;
  j["min_relative_margin"] = number_or_null(c.sigma.min_relative_margin);
  j["phi"] = kfun_json(c.phi);
  j["gamma"] = kfun_json(c.gamma);
  j["lambda"] = kfun_json(c.lambda);
  j["psi1"] = kfun_json(c.psi1);
  j["psi2"] = kfun_json(c.psi2);
  j["alpha"] = kfun_json(c.alpha);
  return j;
}

json batch_json(const traj::BatchResult& b) {
  json j;
  j["property"] = b.property;
  j["pass"] = b.pass();
  json ts = json::array();
  for (const auto& t : b.trajectories) {
    json tj;
    tj["label"] = t.label;
    tj["pass"] = t.pass;
    tj["checks"] = t.checks;
    tj["worst"] = {{"t", t.worst_at.t},
                   {"k", t.worst_at.k},
                   {"subsystem", t.subsystem == traj::TrajectoryResult::npos ? json("composite") : json(t.subsystem + 1)},
                   {"lhs", number_or_null(t.lhs)},
                   {"rhs", number_or_null(t.rhs)},
                   {"ratio", number_or_null(t.ratio)}};
    if (std::isfinite(t.tail_from)) tj["tail"] = {{"from", t.tail_from}, {"samples", t.tail_samples}};
    if (!t.note.empty()) tj["note"] = t.note;
    ts.push_back(tj);
  }
  j["trajectories"] = ts;
  return j;
}

// ---------------------------------------------------------------------------
// Commands

struct Outcome {
  int code;
  json report;
};

lyapunov::CompositeCertificate composite_of(const ProjectConfig& cfg) {
  if (cfg.candidates.empty()) throw ConfigError("lyapunov: missing; this command needs Lyapunov candidates");
  lyapunov::CompositeOptions opt;
  opt.grid = cfg.grid;
  opt.small_gain = cfg.small_gain;
  return lyapunov::build_composite(cfg.candidates, *cfg.gains, cfg.network, cfg.anchor, opt);
}

const gain::GainMatrix& gains_of(const ProjectConfig& cfg) {
  if (!cfg.gains) throw ConfigError("gains: missing");
  return *cfg.gains;
}

json warnings_json(const ProjectConfig& cfg) {
  json w = json::array();
  for (const auto& s : cfg.network.warnings()) w.push_back(s);
  return w;
}

Outcome cmd_check_gains(const ProjectConfig& cfg) {
  const auto v = gain::small_gain_check(gains_of(cfg), cfg.small_gain);
  json r;
  r["command"] = "check-gains";
  r["small_gain"] = verdict_json(v);
  r["warnings"] = warnings_json(cfg);
  return {v.holds() ? kExitPass : kExitFail, r};
}

Outcome cmd_build_lyapunov(const ProjectConfig& cfg) {
  json r;
  r["command"] = "build-lyapunov";
  const auto v = gain::small_gain_check(gains_of(cfg), cfg.small_gain);
  r["small_gain"] = verdict_json(v);
  if (cfg.candidates.empty()) throw ConfigError("lyapunov: missing; this command needs Lyapunov candidates");
  if (!v.holds()) {
    r["error"] = "the small-gain condition does not hold; no composite function is built";
    return {kExitFail, r};
  }
  try {
    r["certificate"] = certificate_json(composite_of(cfg));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    r["error"] = e.what();
    return {kExitFail, r};
  }
  return {kExitPass, r};
}

int exit_of(lyapunov::Outcome o) { return o == lyapunov::Outcome::Pass ? kExitPass : kExitFail; }

Outcome cmd_verify(const ProjectConfig& cfg, const std::string& which) {
  json r;
  r["command"] = "verify";
  r["which"] = which;
  r["warnings"] = warnings_json(cfg);
  if (cfg.candidates.empty()) throw ConfigError("lyapunov: missing; this command needs Lyapunov candidates");
  int code = kExitPass;
  json reports = json::array();
  auto add = [&](const lyapunov::VerificationReport& rep) {
    reports.push_back(report_json(rep));
    code = std::max(code, exit_of(rep.verdict()));
  };
  try {
    if (which == "subsystem") {
      for (std::size_t i = 0; i < cfg.network.size(); ++i)
        add(lyapunov::verify_subsystem(cfg.candidates, i, cfg.network, cfg.sampler));
    } else {
      if (!cfg.network.jump_sets_equal())
        throw Error("the composite conditions assume a common jump set D_i = D, which this network violates");
      const auto cert = composite_of(cfg);
      if (which == "composite") {
        add(lyapunov::verify_composite_sandwich(cert, cfg.network, cfg.sampler));
        add(lyapunov::verify_composite_flow(cert, cfg.network, cfg.sampler));
        add(lyapunov::verify_composite_jump(cert, cfg.network, cfg.sampler));
      } else {
        const auto w = equiv::to_w_form(cert, cfg.network, cfg.sampler, cfg.equiv);
        add(w.report);
        r["threshold_form"] = {{"gamma_bar", kfun_json(w.w.gamma_bar)},
                               {"rho", kfun_json(w.w.rho)},
                               {"alpha1", kfun_json(w.w.alpha1)},
                               {"alpha2", kfun_json(w.w.alpha2)}};
        const auto v = equiv::to_v_form(w.w, cfg.network, cfg.sampler, cfg.equiv);
        add(v.report);
        auto back = cert;
        back.lambda = v.lambda;
        back.gamma = v.gamma_final;
        auto jump = lyapunov::verify_composite_jump(back, cfg.network, cfg.sampler);
        jump.subject = "implication form from the threshold form";
        add(jump);
        r["implication_form"] = {{"gamma", kfun_json(v.gamma)},
                                 {"gamma_final", kfun_json(v.gamma_final)},
                                 {"alpha_tilde", kfun_json(v.alpha_tilde)},
                                 {"lambda", kfun_json(v.lambda)}};
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    r["reports"] = reports;
    r["error"] = e.what();
    return {kExitFail, r};
  }
  r["reports"] = reports;
  r["verdict"] = code == kExitPass ? "pass" : "fail";
  return {code, r};
}

json domain_summary(const hybrid::SolutionPair& sol) {
  json j;
  j["termination"] = hybrid::to_string(sol.reason);
  j["samples"] = sol.x.samples().size();
  const auto dom = sol.x.domain();
  j["jumps"] = dom.jumps();
  json iv = json::array();
  for (const auto& i : dom.intervals()) iv.push_back({{"k", i.k}, {"t_begin", i.t_begin}, {"t_end", i.t_end}});
  j["intervals"] = iv;
  const auto& last = sol.x.back();
  j["final"] = {{"t", last.t}, {"k", last.k}, {"x", vector_json(last.value)}};
  return j;
}

void write_header_only(std::ostream& os, const hybrid::NetworkSpec& net) {
  os << "t,k";
  for (std::size_t i = 1; i <= net.state_dim(); ++i) os << ",x_" << i;
  for (std::size_t i = 1; i <= net.input_dim(); ++i) os << ",u_" << i;
  os << ",phase\n";
}

Outcome cmd_check_traj(const ProjectConfig& cfg) {
  if (!cfg.trajectories) throw ConfigError("analysis.trajectories: missing");
  const auto& tc = *cfg.trajectories;
  if (tc.initial_conditions.empty() || tc.input_levels.empty())
    throw ConfigError("analysis.trajectories: empty batch (no initial conditions or input levels)");
  std::vector<std::vector<double>> x0s;
  std::vector<hybrid::InputSignal> us;
  for (const auto& x0 : tc.initial_conditions)
    for (double level : tc.input_levels) {
      x0s.push_back(x0);
      us.push_back(hybrid::InputSignal::constant(std::vector<double>(cfg.network.input_dim(), level)));
    }
  json r;
  r["command"] = "check-traj";
  r["batch"] = {{"initial_conditions", tc.initial_conditions.size()},
                {"input_levels", vector_json(tc.input_levels)},
                {"horizon", tc.horizon},
                {"max_jumps", tc.max_jumps}};
  int code = kExitPass;
  json results = json::array();
  try {
    const auto sols = traj::simulate_batch(cfg.network, x0s, us, tc.horizon, tc.max_jumps, cfg.sim);
    for (const auto& p : tc.properties) {
      traj::BatchResult b;
      if (p == "iss") b = traj::check_iss(sols, cfg.network, tc.estimates, tc.composite);
      if (p == "pre_gs") b = traj::check_pre_gs(sols, cfg.network, tc.estimates, tc.composite);
      if (p == "ag") b = traj::check_ag(sols, cfg.network, tc.estimates, tc.composite, tc.tail_fraction);
      if (!b.pass()) code = kExitFail;
      results.push_back(batch_json(b));
    }
    if (!tc.gain_levels.empty()) {
      traj::GainTableOptions go;
      go.horizon = tc.horizon;
      go.max_jumps = tc.max_jumps;
      go.tail_fraction = tc.tail_fraction;
      go.sim = cfg.sim;
      const auto table = traj::fit_empirical_gain(cfg.network, tc.gain_levels, go);
      json gj;
      gj["levels"] = vector_json(table.levels);
      gj["gain"] = vector_json(table.gain);
      gj["raw"] = vector_json(table.raw);
      gj["skipped"] = table.skipped;
      if (!cfg.candidates.empty()) {
        const auto cert = composite_of(cfg);
        const auto bound = kfun::compose(kfun::inverse(cert.psi1), cert.gamma);
        std::vector<double> b;
        bool below = true;
        for (std::size_t k = 0; k < table.levels.size(); ++k) {
          b.push_back(bound.is_zero() ? 0.0 : bound(table.levels[k]));
          below = below && table.gain[k] <= b.back() + traj::kAgTolerance;
        }
        gj["certificate_bound"] = vector_json(b);
        gj["within_bound"] = below;
        if (!below) code = kExitFail;
      }
      r["gain_table"] = gj;
    }
    if (!tc.delta_grid.empty() || !tc.epsilon_grid.empty()) {
      traj::PrestabilityOptions po;
      po.horizon = tc.horizon;
      po.max_jumps = tc.max_jumps;
      po.seed = cfg.seed;
      po.sim = cfg.sim;
      const auto ps = traj::check_zero_input_prestability(cfg.network, tc.delta_grid, tc.epsilon_grid, po);
      json delta = json::array();
      for (const auto& d : ps.delta) delta.push_back(d ? json(*d) : json(nullptr));
      r["prestability"] = {{"pass", ps.pass()},
                           {"delta_grid", vector_json(ps.delta_grid)},
                           {"reach", vector_json(ps.reach)},
                           {"epsilon_grid", vector_json(ps.epsilon_grid)},
                           {"delta", delta}};
      if (!ps.pass()) code = kExitFail;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    r["results"] = results;
    r["error"] = e.what();
    return {kExitFail, r};
  }
  r["results"] = results;
  r["verdict"] = code == kExitPass ? "pass" : "fail";
  return {code, r};
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError("--x0: '" + item + "' is not a number");
    }
  }
  return out;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Small-gain analysis of networks of hybrid systems", "hsgt"};
  app.require_subcommand(1);
  std::string config, out_path, which = "composite", x0;
  std::optional<std::uint64_t> seed;
  std::optional<double> horizon;
  std::optional<std::size_t> max_jumps;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "project configuration (JSON)")->required();
    sub->add_option("--out", out_path, "write the report (or the CSV for simulate) to this file");
    sub->add_option("--seed", seed, "seed for every randomized analysis");
  };
  auto* gains = app.add_subcommand("check-gains", "check the small-gain condition");
  auto* build = app.add_subcommand("build-lyapunov", "build the composite ISS-Lyapunov function");
  auto* verify = app.add_subcommand("verify", "sample the Lyapunov conditions");
  auto* simulate = app.add_subcommand("simulate", "simulate one solution and write it as CSV");
  auto* traj_cmd = app.add_subcommand("check-traj", "check trajectory estimates on a batch of simulations");
  for (auto* s : {gains, build, verify, simulate, traj_cmd}) common(s);
  verify->add_option("--which", which, "subsystem, composite or wform")
      ->check(CLI::IsMember({"subsystem", "composite", "wform"}));
  simulate->add_option("--x0", x0, "initial state, comma separated");
  simulate->add_option("--horizon", horizon, "flow time horizon T");
  simulate->add_option("--max-jumps", max_jumps, "jump limit K");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitPass;
  } catch (const CLI::ParseError& e) {
    err << "hsgt: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    auto cfg = load_config(config);
    if (seed) apply_seed(cfg, *seed);
    for (const auto& w : cfg.network.warnings()) err << "hsgt: warning: " << w << "\n";

    if (simulate->parsed()) {
      SimulationConfig sc = cfg.simulation.value_or(
          SimulationConfig{std::vector<double>(cfg.network.state_dim(), 0.0),
                           hybrid::InputSignal::zero(cfg.network.input_dim()), 1.0, 10});
      if (!x0.empty()) sc.x0 = parse_list(x0);
      if (horizon) sc.horizon = *horizon;
      if (max_jumps) sc.max_jumps = *max_jumps;
      if (sc.x0.size() != cfg.network.state_dim())
        throw ConfigError("--x0: expected " + std::to_string(cfg.network.state_dim()) + " components");
      if (!(sc.horizon >= 0)) throw ConfigError("--horizon: must be nonnegative");
      std::ofstream file;
      if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw ConfigError(out_path + ": cannot write");
      }
      std::ostream& csv = out_path.empty() ? out : file;
      std::ostream& summary = out_path.empty() ? err : out;
      if (sc.horizon == 0.0 && sc.max_jumps == 0) {
        write_header_only(csv, cfg.network);
        summary << json{{"command", "simulate"}, {"samples", 0}}.dump(2) << "\n";
        return kExitPass;
      }
      hybrid::SolutionPair sol;
      try {
        sol = hybrid::simulate(cfg.network, sc.x0, sc.input, sc.horizon, sc.max_jumps, cfg.sim);
      } catch (const Error& e) {
        summary << json{{"command", "simulate"}, {"error", e.what()}}.dump(2) << "\n";
        return kExitFail;
      }
      hybrid::write_csv(csv, sol);
      json r{{"command", "simulate"}};
      r.update(domain_summary(sol));
      summary << r.dump(2) << "\n";
      return kExitPass;
    }

    Outcome o;
    if (gains->parsed()) o = cmd_check_gains(cfg);
    if (build->parsed()) o = cmd_build_lyapunov(cfg);
    if (verify->parsed()) o = cmd_verify(cfg, which);
    if (traj_cmd->parsed()) o = cmd_check_traj(cfg);
    o.report["exit_code"] = o.code;
    if (out_path.empty()) {
      out << o.report.dump(2) << "\n";
    } else {
      std::ofstream file(out_path);
      if (!file) throw ConfigError(out_path + ": cannot write");
      file << o.report.dump(2) << "\n";
    }
    return o.code;
  } catch (const ConfigError& e) {
    err << "hsgt: config error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace hsgt::cli
