#include "hsgt/gain_network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "hsgt/cycles.hpp"
#include "hsgt/error.hpp"

namespace hsgt::gain {

GainMatrix::GainMatrix(std::size_t n) : n_(n), entries_(n * n) {}

const KFun& GainMatrix::operator()(std::size_t i, std::size_t j) const {
  if (i >= n_ || j >= n_) throw DimensionError("gain index out of range");
  return entries_[i * n_ + j];
}

void GainMatrix::set(std::size_t i, std::size_t j, KFun gain) {
  if (i >= n_ || j >= n_) throw DimensionError("gain index out of range");
  if (gain.is_zero()) {
    entries_[i * n_ + j] = KFun::zero();
    return;
  }
  if (i == j) throw Error("diagonal gain gamma_" + std::to_string(i + 1) + std::to_string(i + 1) + " must be zero");
  const auto& c = gain.classification();
  if (c.cls != kfun::FunctionClass::ClassKInfinity) {
    throw Error("gain gamma_" + std::to_string(i + 1) + "," + std::to_string(j + 1) + " = " + gain.describe() +
                " is " + kfun::to_string(c.cls) + ", expected K-infinity" +
                (c.reason.empty() ? "" : " (" + c.reason + ")"));
  }
  entries_[i * n_ + j] = std::move(gain);
}

std::vector<double> gamma_max_apply(const GainMatrix& gamma, std::span<const double> s) {
  const std::size_t n = gamma.size();
  if (s.size() != n) throw DimensionError("vector length " + std::to_string(s.size()) + " != " + std::to_string(n));
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!gamma.has_edge(i, j)) continue;
      out[i] = std::max(out[i], gamma(i, j)(s[j]));
    }
  }
  return out;
}

std::vector<double> iterate_gamma(const GainMatrix& gamma, std::span<const double> s, std::size_t p) {
  if (s.size() != gamma.size()) throw DimensionError("vector length does not match gain matrix");
  std::vector<double> v(s.begin(), s.end());
  for (std::size_t k = 0; k < p; ++k) v = gamma_max_apply(gamma, v);
  return v;
}

double cycle_gain(const GainMatrix& gamma, const std::vector<std::size_t>& cycle, double r) {
  const std::size_t m = cycle.size();
  double v = r;
  for (std::size_t l = m; l-- > 0;) v = gamma(cycle[l], cycle[(l + 1) % m])(v);
  return v;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Holds: return "holds";
    case Verdict::Fails: return "fails";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

namespace {

bool is_witness(const GainMatrix& gamma, const std::vector<double>& s) {
  bool nonzero = false;
  for (double x : s) {
    if (!std::isfinite(x) || x < 0) return false;
    nonzero = nonzero || x > 0;
  }
  if (!nonzero) return false;
  const auto g = gamma_max_apply(gamma, s);
  for (std::size_t i = 0; i < s.size(); ++i)
    if (!(g[i] >= s[i])) return false;
  return true;
}

// Walks the cycle backwards from s_{c0} = r so that every edge of the cycle is
// matched exactly; then Gamma_max(s) >= s whenever the composed gain is >= r.
std::vector<double> vector_from_cycle(const GainMatrix& gamma, const CycleWitness& w) {
  std::vector<double> s(gamma.size(), 0.0);
  const auto& c = w.cycle;
  const std::size_t m = c.size();
  double v = w.radius;
  s[c[0]] = v;
  for (std::size_t l = m - 1; l >= 1; --l) {
    v = gamma(c[l], c[(l + 1) % m])(v);
    s[c[l]] = v;
  }
  return s;
}

// Unit directions of the max-norm sphere in the positive orthant: a
// (levels+1)^n lattice restricted to points with a coordinate equal to one,
// followed by random directions.
std::vector<std::vector<double>> search_directions(std::size_t n, const SmallGainOptions& opt) {
  std::size_t levels = 1;
  auto fits = [&](std::size_t l) {
    double total = 1.0;
    for (std::size_t i = 0; i < n; ++i) total *= static_cast<double>(l + 1);
    return total <= static_cast<double>(opt.direction_grid_budget);
  };
  while (levels < 64 && fits(levels + 1)) ++levels;

  std::vector<std::vector<double>> dirs;
  std::vector<std::size_t> idx(n, 0);
  while (true) {
    const bool on_sphere = std::find(idx.begin(), idx.end(), levels) != idx.end();
    if (on_sphere) {
      std::vector<double> d(n);
      for (std::size_t i = 0; i < n; ++i) d[i] = static_cast<double>(idx[i]) / static_cast<double>(levels);
      dirs.push_back(std::move(d));
    }
    std::size_t k = 0;
    while (k < n && idx[k] == levels) idx[k++] = 0;
    if (k == n) break;
    ++idx[k];
  }

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t t = 0; t < opt.random_directions; ++t) {
    std::vector<double> d(n);
    double m = 0.0;
    for (auto& x : d) {
      x = u(rng);
      m = std::max(m, x);
    }
    if (m == 0.0) continue;
    for (auto& x : d) x /= m;
    dirs.push_back(std::move(d));
  }
  return dirs;
}

std::optional<std::vector<double>> direct_search(const GainMatrix& gamma, const std::vector<double>& grid,
                                                 const SmallGainOptions& opt) {
  const std::size_t n = gamma.size();
  std::vector<double> radii;
  const std::size_t stride = std::max<std::size_t>(1, opt.direct_radius_stride);
  for (std::size_t k = 0; k < grid.size(); k += stride) radii.push_back(grid[k]);
  if (radii.back() != grid.back()) radii.push_back(grid.back());

  for (const auto& d : search_directions(n, opt)) {
    for (double r : radii) {
      std::vector<double> s(n);
      for (std::size_t i = 0; i < n; ++i) s[i] = r * d[i];
      if (is_witness(gamma, s)) return s;
    }
  }
  return std::nullopt;
}

}  // namespace

SmallGainVerdict small_gain_check(const GainMatrix& gamma, const SmallGainOptions& opt) {
  if (opt.grid.points < 16) throw Error("small-gain grid needs at least 16 points");
  const auto grid = opt.grid.values();
  const std::size_t n = gamma.size();
  SmallGainVerdict out;

  bool cycle_violation = false, cycle_borderline = false;
  if (n <= opt.max_cycle_nodes) {
    out.cycle_method_ran = true;
    graph::Adjacency adj(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (gamma.has_edge(i, j)) adj[i].push_back(j);

    bool truncated = false;
    graph::for_each_simple_cycle(adj, [&](const std::vector<std::size_t>& cycle) {
      if (out.cycles_checked >= opt.max_cycles) {
        truncated = true;
        return false;
      }
      ++out.cycles_checked;
      for (double r : grid) {
        const double c = cycle_gain(gamma, cycle, r);
        const double ratio = c / r;
        if (!out.worst_cycle || ratio > out.worst_cycle_ratio) {
          out.worst_cycle_ratio = ratio;
          out.worst_cycle = CycleWitness{cycle, r, c};
        }
        if (c >= r) {
          cycle_violation = true;
          out.cycle_witness = CycleWitness{cycle, r, c};
          return false;
        }
        if (c > (1.0 - opt.strictness) * r) cycle_borderline = true;
      }
      return true;
    });
    if (truncated) {
      cycle_borderline = true;
      out.note = "cycle enumeration stopped after " + std::to_string(opt.max_cycles) + " cycles";
    }
  } else {
    out.note = "cycle method skipped for n > " + std::to_string(opt.max_cycle_nodes) + "; direct search only";
  }

  if (out.cycle_witness) {
    auto s = vector_from_cycle(gamma, *out.cycle_witness);
    if (is_witness(gamma, s)) out.vector_witness = std::move(s);
  }
  if (!out.vector_witness) {
    if (auto s = direct_search(gamma, grid, opt)) {
      out.vector_witness = std::move(s);
      if (out.cycle_method_ran && !cycle_violation && !cycle_borderline) out.methods_disagree = true;
    }
  }

  if (cycle_violation || out.vector_witness) {
    out.status = Verdict::Fails;
  } else if (cycle_borderline) {
    out.status = Verdict::Inconclusive;
    if (out.note.empty()) {
      std::ostringstream msg;
      msg << "cycle gain ratio " << out.worst_cycle_ratio << " is within the strictness margin of 1";
      out.note = msg.str();
    }
  } else {
    out.status = Verdict::Holds;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Omega path

namespace {

struct PathData {
  GainMatrix gamma;
  std::vector<double> anchor;
  double scale;  // 1 + inflation
};

// Q(a r) with inflated Gamma, values only.
std::vector<double> q_values(const PathData& p, double r) {
  const std::size_t n = p.gamma.size();
  std::vector<double> v(n), q(n);
  for (std::size_t i = 0; i < n; ++i) q[i] = v[i] = p.anchor[i] * r;
  for (std::size_t k = 1; k < n; ++k) {
    v = gamma_max_apply(p.gamma, v);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] *= p.scale;
      q[i] = std::max(q[i], v[i]);
    }
  }
  return q;
}

// Max of jets keeping the largest slope among tied branches, which is the
// right derivative of the max.
void max_into(Jet& acc, const Jet& j) {
  if (tied(acc.v, j.v)) {
    if (acc.d != j.d) acc.kink = true;
    acc.kink = acc.kink || j.kink;
    acc.v = std::max(acc.v, j.v);
    acc.d = std::max(acc.d, j.d);
  } else if (j.v > acc.v) {
    acc = j;
  }
}

std::vector<Jet> q_jets(const PathData& p, double r) {
  const std::size_t n = p.gamma.size();
  std::vector<Jet> v(n), q(n);
  for (std::size_t i = 0; i < n; ++i) q[i] = v[i] = Jet::variable(p.anchor[i] * r, p.anchor[i]);
  for (std::size_t k = 1; k < n; ++k) {
    std::vector<Jet> next(n, Jet::constant(0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (!p.gamma.has_edge(i, j)) continue;
        const Jet g = p.gamma(i, j).jet(v[j].v);
        max_into(next[i], Jet{g.v * p.scale, g.d * v[j].d * p.scale, g.kink || v[j].kink});
      }
    }
    v = std::move(next);
    for (std::size_t i = 0; i < n; ++i) max_into(q[i], v[i]);
  }
  return q;
}

std::string format_vector(const std::vector<double>& a) {
  std::ostringstream out;
  out.precision(17);
  out << "(";
  for (std::size_t i = 0; i < a.size(); ++i) out << (i ? ", " : "") << a[i];
  out << ")";
  return out.str();
}

// Smallest relative gap sigma_i - Gamma_max(sigma)_i over the grid; also the
// radius where it occurs.
std::pair<double, double> strict_margin(const GainMatrix& gamma, const std::vector<KFun>& sigma,
                                        const std::vector<double>& grid) {
  const std::size_t n = sigma.size();
  double worst = std::numeric_limits<double>::infinity(), where = 0.0;
  std::vector<double> s(n);
  for (double r : grid) {
    for (std::size_t i = 0; i < n; ++i) s[i] = sigma[i](r);
    const auto g = gamma_max_apply(gamma, s);
    for (std::size_t i = 0; i < n; ++i) {
      const double m = (s[i] - g[i]) / s[i];
      if (!(m >= worst)) {
        worst = m;
        where = r;
      }
    }
  }
  return {worst, where};
}

std::vector<KFun> make_sigma(const std::shared_ptr<const PathData>& data) {
  const std::size_t n = data->gamma.size();
  std::vector<KFun> sigma;
  for (std::size_t i = 0; i < n; ++i) {
    std::ostringstream desc;
    desc << "Q_" << (i + 1) << "(a r)";
    if (data->scale != 1.0) desc << " with Gamma scaled by " << data->scale;
    desc << ", a = " << format_vector(data->anchor);
    KFun f = KFun::custom([data, i](double r) { return q_values(*data, r)[i]; }, desc.str(),
                          [data, i](double r) { return q_jets(*data, r)[i]; });
    if (auto c = f.linear_slope()) f = KFun::linear(*c);
    sigma.push_back(std::move(f));
  }
  return sigma;
}

}  // namespace

std::vector<double> OmegaPath::operator()(double r) const {
  std::vector<double> out(sigma.size());
  for (std::size_t i = 0; i < sigma.size(); ++i) out[i] = sigma[i](r);
  return out;
}

OmegaPath build_omega_path(const GainMatrix& gamma, std::span<const double> anchor, const kfun::Grid& grid) {
  const std::size_t n = gamma.size();
  if (anchor.size() != n) throw DimensionError("anchor length does not match gain matrix");
  for (double a : anchor)
    if (!(a > 0) || !std::isfinite(a)) throw Error("anchor entries must be positive");
  const auto points = grid.values();

  // The plain construction can meet Gamma_max(sigma) = sigma exactly on some
  // component (a cycle whose gain product sits at the anchor ratio). A small
  // inflation of Gamma inside Q restores the strict inequality.
  const double inflations[] = {0.0, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  double best_margin = -std::numeric_limits<double>::infinity(), best_where = 0.0;
  for (double eps : inflations) {
    auto data = std::make_shared<const PathData>(PathData{gamma, {anchor.begin(), anchor.end()}, 1.0 + eps});
    auto sigma = make_sigma(data);
    const auto [margin, where] = strict_margin(gamma, sigma, points);
    if (margin > best_margin) {
      best_margin = margin;
      best_where = where;
    }
    if (!(margin > 0.0)) continue;

    bool all_kinf = true;
    for (const auto& s : sigma) all_kinf = all_kinf && s.classification().cls == kfun::FunctionClass::ClassKInfinity;
    if (!all_kinf) continue;

    OmegaPath out;
    out.sigma = std::move(sigma);
    out.anchor.assign(anchor.begin(), anchor.end());
    out.inflation = eps;
    out.min_relative_margin = margin;
    out.grid = grid;
    return out;
  }
  std::ostringstream msg;
  msg << "Omega-path property Gamma_max(sigma(r)) < sigma(r) violated at r = " << best_where
      << " (relative margin " << best_margin << "); the small-gain check was a false positive";
  throw Error(msg.str());
}

KFun compose_phi(const OmegaPath& path, const GainMatrix& gamma) {
  const std::size_t n = path.size();
  if (n != gamma.size()) throw DimensionError("path and gain matrix sizes differ");
  if (n == 0) throw Error("empty path");
  const KFun phi = pointwise_min(path.sigma);
  std::vector<double> s(n);
  for (double r : path.grid.values()) {
    for (std::size_t i = 0; i < n; ++i) s[i] = path.sigma[i](r);
    const auto g = gamma_max_apply(gamma, s);
    const double p = phi(r);
    for (std::size_t i = 0; i < n; ++i) {
      if (std::max(g[i], p) > s[i]) {
        std::ostringstream msg;
        msg << "sigma_max inequality violated for i = " << (i + 1) << " at r = " << r << ": max{" << g[i] << ", "
            << p << "} > " << s[i];
        throw Error(msg.str());
      }
    }
  }
  return phi;
}

}  // namespace hsgt::gain
