#include "hsgt/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "hsgt/error.hpp"

namespace hsgt::lyapunov {

gain::GainMatrix gain_matrix(const std::vector<SubsystemLyapunov>& cands) {
  const std::size_t n = cands.size();
  gain::GainMatrix g(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (cands[i].gains.size() != n) throw DimensionError("candidate " + std::to_string(i + 1) + " needs n gains");
    for (std::size_t j = 0; j < n; ++j) g.set(i, j, cands[i].gains[j]);
  }
  return g;
}

double block_norm(const std::vector<double>& x, std::size_t offset, std::size_t dim) {
  double m = 0.0;
  for (std::size_t r = 0; r < dim; ++r) m = std::max(m, std::abs(x[offset + r]));
  return m;
}

void ConditionRecorder::add(const SamplePoint& p, double measured, double bound, double tolerance, bool strict) {
  ++r_.tested;
  const double margin = bound - measured;
  r_.min_margin = std::min(r_.min_margin, margin);
  if (strict ? !(margin > 0) : !(margin >= -tolerance)) {
    ++r_.violation_count;
    if (r_.violations.size() < kMaxStoredViolations) r_.violations.push_back({p.x, p.u, measured, bound});
  }
}

void ConditionRecorder::empirical_min(double v) {
  if (std::isnan(r_.empirical) || v < r_.empirical) r_.empirical = v;
}

ConditionReport ConditionRecorder::finish(const std::string& empty_note) {
  if (r_.tested == 0) {
    r_.verdict = Outcome::Inconclusive;
    r_.note = empty_note;
  } else {
    r_.verdict = r_.violation_count ? Outcome::Fail : Outcome::Pass;
  }
  return std::move(r_);
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Pass: return "pass";
    case Outcome::Fail: return "fail";
    case Outcome::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

Outcome VerificationReport::verdict() const {
  bool inconclusive = conditions.empty();
  for (const auto& c : conditions) {
    if (c.verdict == Outcome::Fail) return Outcome::Fail;
    if (c.verdict == Outcome::Inconclusive) inconclusive = true;
  }
  return inconclusive ? Outcome::Inconclusive : Outcome::Pass;
}

// ---------------------------------------------------------------------------
// Sampling

std::vector<SamplePoint> draw_samples(const SamplerSpec& spec, std::size_t state_dim, std::size_t input_dim,
                                      const std::vector<Surface>& surfaces) {
  if (!(spec.state_radius > 0)) throw Error("sampler state radius must be positive");
  if (!(spec.input_radius >= 0)) throw Error("sampler input radius must be nonnegative");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto uniform = [&] {
    SamplePoint p{std::vector<double>(state_dim), std::vector<double>(input_dim, 0.0)};
    for (auto& v : p.x) v = spec.state_radius * unit(rng);
    if (spec.input_radius > 0)
      for (auto& v : p.u) v = spec.input_radius * unit(rng);
    return p;
  };

  std::vector<SamplePoint> out;
  out.reserve(spec.count + 2);
  const double frac = surfaces.empty() ? 1.0 : std::clamp(spec.uniform_fraction, 0.0, 1.0);
  const auto n_uniform = static_cast<std::size_t>(std::llround(frac * static_cast<double>(spec.count)));
  for (std::size_t s = 0; s < n_uniform; ++s) out.push_back(uniform());
  if (surfaces.empty()) return out;

  const std::size_t rest = spec.count - std::min(n_uniform, spec.count);
  for (std::size_t s = 0; out.size() < spec.count && s < rest; ++s) {
    const Surface& surf = surfaces[s % surfaces.size()];
    SamplePoint base = uniform();
    double block = 0.0;
    for (std::size_t idx : surf.scaled) block = std::max(block, std::abs(base.x.at(idx)));
    bool placed = false;
    if (block > 0) {
      const double cmax = spec.state_radius / block;
      auto at = [&](double c) {
        SamplePoint p = base;
        for (std::size_t idx : surf.scaled) p.x[idx] *= c;
        return p;
      };
      try {
        double lo = 0.0, hi = cmax;
        const double hlo = surf.h(at(lo)), hhi = surf.h(at(hi));
        if (std::isfinite(hlo) && std::isfinite(hhi) && (hlo <= 0) != (hhi <= 0)) {
          const bool lo_nonpos = hlo <= 0;
          for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            if ((surf.h(at(mid)) <= 0) == lo_nonpos) lo = mid;
            else hi = mid;
          }
          out.push_back(at(lo));
          if (out.size() < spec.count) out.push_back(at(hi));
          placed = true;
        }
      } catch (const DomainError&) {
      } catch (const RangeError&) {
      }
    }
    if (!placed) out.push_back(std::move(base));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Directional derivatives

namespace {

double difference_bound(const Piece& p, const std::vector<double>& x, const std::vector<double>& dir, double f0) {
  const double h = kDifferenceStep;
  std::vector<double> xp(x), xm(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] += h * dir[i];
    xm[i] -= h * dir[i];
  }
  const double fp = p.value(xp), fm = p.value(xm);
  const double fwd = (fp - f0) / h, bwd = (f0 - fm) / h, cen = (fp - fm) / (2 * h);
  return std::max({fwd, bwd, cen});
}

}  // namespace

double clarke_directional_bound(const std::vector<Piece>& pieces, const std::vector<double>& x,
                                const std::vector<double>& direction) {
  if (pieces.empty()) throw Error("no pieces");
  if (direction.size() != x.size()) throw DimensionError("direction and point differ in length");
  std::vector<double> vals;
  vals.reserve(pieces.size());
  for (const auto& p : pieces) vals.push_back(p.value(x));
  const double top = *std::max_element(vals.begin(), vals.end());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    if (vals[k] < top - kActiveTolerance) continue;
    double d;
    bool numeric = !pieces[k].jet;
    if (!numeric) {
      const Jet j = pieces[k].jet(x, direction);
      numeric = j.kink || !std::isfinite(j.d);
      d = j.d;
    }
    if (numeric) d = difference_bound(pieces[k], x, direction, vals[k]);
    if (!std::isfinite(d)) throw DomainError("non-finite directional derivative estimate");
    best = std::max(best, d);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Shared helpers for the checks

namespace {


double input_norm(const std::vector<double>& u) { return hybrid::max_norm(u); }

std::vector<std::size_t> block_indices(std::size_t offset, std::size_t dim) {
  std::vector<std::size_t> out(dim);
  for (std::size_t r = 0; r < dim; ++r) out[r] = offset + r;
  return out;
}

std::vector<std::size_t> all_indices(std::size_t n) { return block_indices(0, n); }

void check_candidate_shape(const std::vector<SubsystemLyapunov>& cands, const hybrid::NetworkSpec& net) {
  if (cands.size() != net.size())
    throw DimensionError("got " + std::to_string(cands.size()) + " candidates for " + std::to_string(net.size()) +
                         " subsystems");
  const auto names = hybrid::state_names(net.state_dim());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (cands[i].gains.size() != cands.size())
      throw DimensionError("candidate " + std::to_string(i + 1) + " needs one gain per subsystem");
    if (!cands[i].gains[i].is_zero()) throw Error("candidate " + std::to_string(i + 1) + " has a self gain");
    for (const auto& v : cands[i].V.free_variables()) {
      const auto it = std::find(names.begin(), names.end(), v);
      const auto idx = static_cast<std::size_t>(it - names.begin());
      if (it == names.end() || idx < net.offset(i) || idx >= net.offset(i) + net.dim(i))
        throw Error("V_" + std::to_string(i + 1) + " uses '" + v + "' outside its own state block");
    }
  }
}

Piece expr_piece(const expr::CompiledExpr& c) {
  return {[&c](const std::vector<double>& x) { return c(x); },
          [&c](const std::vector<double>& x, const std::vector<double>& d) { return c.jet(x, d); }};
}

}  // namespace

// ---------------------------------------------------------------------------
// Subsystems

VerificationReport verify_subsystem(const std::vector<SubsystemLyapunov>& cands, std::size_t i,
                                    const hybrid::NetworkSpec& net, const SamplerSpec& sampler) {
  check_candidate_shape(cands, net);
  if (i >= cands.size()) throw DimensionError("subsystem index out of range");
  const std::size_t n = cands.size(), N = net.state_dim(), M = net.input_dim();
  const auto names = hybrid::state_names(N);
  std::vector<expr::CompiledExpr> V;
  for (const auto& c : cands) V.emplace_back(c.V, names);
  const auto& me = cands[i];
  const std::size_t off = net.offset(i), dim = net.dim(i);

  VerificationReport report;
  report.subject = "subsystem " + std::to_string(i + 1);

  // Sandwich psi_i1(|x_i|) <= V_i(x_i) <= psi_i2(|x_i|).
  {
    ConditionRecorder rec("sandwich");
    for (const auto& p : draw_samples(sampler, N, M, {})) {
      const double r = block_norm(p.x, off, dim), v = V[i](p.x);
      const double lo = me.psi1(r), hi = me.psi2(r);
      const double tol = kJumpRelTolerance * std::max(1.0, std::abs(v)) + 1e-15;
      rec.add(p, lo, v, tol);
      rec.add(p, v, hi, tol);
    }
    report.conditions.push_back(rec.finish("no samples"));
  }

  // lambda_i(s) < s on the standard grid.
  {
    ConditionRecorder rec("lambda_contraction");
    const SamplePoint none{{}, {}};
    for (double s : kfun::Grid::standard().values()) rec.add(none, me.lambda(s), s, 0.0, true);
    report.conditions.push_back(rec.finish("empty grid"));
  }

  {
    ConditionRecorder rec("alpha_positive_definite");
    const auto cls = me.alpha.classification().cls;
    const bool ok = cls == kfun::FunctionClass::PositiveDefinite || cls == kfun::FunctionClass::ClassK ||
                    cls == kfun::FunctionClass::ClassKInfinity;
    rec.add({{}, {}}, ok ? 0.0 : 1.0, 0.0, 0.0);
    auto c = rec.finish("");
    c.note = "alpha classified " + kfun::to_string(cls);
    report.conditions.push_back(std::move(c));
  }

  // Premise max{gamma_ij(V_j), gamma_i(|u|)} <= V_i.
  auto premise_rhs = [&](const SamplePoint& p) {
    double rhs = me.input_gain.is_zero() ? 0.0 : me.input_gain(input_norm(p.u));
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && !me.gains[j].is_zero()) rhs = std::max(rhs, me.gains[j](V[j](p.x)));
    return rhs;
  };

  // Flow condition on C_i.
  {
    std::vector<Surface> surfaces;
    surfaces.push_back({[&](const SamplePoint& p) { return net.flow_guard(i, p.x, p.u); }, all_indices(N)});
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || me.gains[j].is_zero()) continue;
      surfaces.push_back({[&, j](const SamplePoint& p) { return V[i](p.x) - me.gains[j](V[j](p.x)); },
                          block_indices(off, dim)});
    }
    if (!me.input_gain.is_zero() && M > 0 && sampler.input_radius > 0) {
      surfaces.push_back({[&](const SamplePoint& p) { return V[i](p.x) - me.input_gain(input_norm(p.u)); },
                          block_indices(off, dim)});
    }
    const std::vector<Piece> pieces{expr_piece(V[i])};
    ConditionRecorder rec("flow");
    for (const auto& p : draw_samples(sampler, N, M, surfaces)) {
      if (!(net.flow_guard(i, p.x, p.u) <= 0)) continue;
      const double vi = V[i](p.x);
      if (!(vi >= premise_rhs(p))) continue;
      std::vector<double> dir(N, 0.0);
      const auto fi = net.flow(i, p.x, p.u);
      for (std::size_t r = 0; r < dim; ++r) dir[off + r] = fi[r];
      const double d = clarke_directional_bound(pieces, p.x, dir);
      rec.add(p, d, -me.alpha(vi), kFlowTolerance);
      if (vi > 1e-9) rec.empirical_min(-d / vi);
    }
    report.conditions.push_back(rec.finish("sampler produced no points of C_" + std::to_string(i + 1) +
                                           " satisfying the gain premise"));
  }

  // Jump condition on D_i.
  {
    std::vector<Surface> surfaces{
        {[&](const SamplePoint& p) { return net.jump_guard(i, p.x, p.u); }, all_indices(N)}};
    ConditionRecorder rec("jump");
    for (const auto& p : draw_samples(sampler, N, M, surfaces)) {
      if (!(net.jump_guard(i, p.x, p.u) <= 0)) continue;
      std::vector<double> next(p.x);
      const auto gi = net.jump(i, p.x, p.u);
      for (std::size_t r = 0; r < dim; ++r) next[off + r] = gi[r];
      const double lhs = V[i](next);
      const double vi = V[i](p.x);
      const double rhs = std::max(me.lambda.is_zero() ? 0.0 : me.lambda(vi), premise_rhs(p));
      rec.add(p, lhs, rhs, kJumpRelTolerance * std::max(std::abs(rhs), 1e-6));
      if (vi > 1e-9) rec.empirical_min(lhs / vi);
    }
    report.conditions.push_back(rec.finish("sampler produced no points of D_" + std::to_string(i + 1)));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Composite certificate

double CompositeCertificate::scaled(std::size_t i, const std::vector<double>& x) const {
  const double v = Vi[i](x);
  if (v < 0) throw DomainError("V_" + std::to_string(i + 1) + " is negative at a sample point");
  return sigma_inverse[i](v);
}

double CompositeCertificate::V(const std::vector<double>& x) const {
  double m = 0.0;
  for (std::size_t i = 0; i < size(); ++i) m = std::max(m, scaled(i, x));
  return m;
}

std::vector<Piece> CompositeCertificate::pieces() const {
  std::vector<Piece> out;
  for (std::size_t i = 0; i < size(); ++i) {
    out.push_back({[this, i](const std::vector<double>& x) { return scaled(i, x); },
                   [this, i](const std::vector<double>& x, const std::vector<double>& d) {
                     const Jet v = Vi[i].jet(x, d);
                     if (v.v < 0) throw DomainError("V_" + std::to_string(i + 1) + " is negative at a sample point");
                     const Jet s = sigma_inverse[i].jet(v.v);
                     return Jet{s.v, s.d * v.d, s.kink || v.kink};
                   }});
  }
  return out;
}

namespace {

bool same_gain(const KFun& a, const KFun& b, const std::vector<double>& grid) {
  if (a.is_zero() || b.is_zero()) return a.is_zero() == b.is_zero();
  for (double r : grid) {
    const double x = a(r), y = b(r);
    if (std::abs(x - y) > 1e-12 * std::max(std::abs(x), std::abs(y))) return false;
  }
  return true;
}

// Largest one-sided slope of sigma around t.
double upper_slope(const KFun& sigma, double t) {
  const double d = 1e-6;
  const double s0 = sigma(t);
  const double right = (sigma(t * (1 + d)) - s0) / (t * d);
  const double left = (s0 - sigma(t * (1 - d))) / (t * d);
  return std::max({sigma.jet(t).d, right, left});
}

}  // namespace

CompositeCertificate build_composite(const std::vector<SubsystemLyapunov>& cands, const gain::GainMatrix& gamma,
                                     const hybrid::NetworkSpec& net, const std::vector<double>& anchor,
                                     const CompositeOptions& opt) {
  check_candidate_shape(cands, net);
  const std::size_t n = cands.size();
  if (gamma.size() != n) throw DimensionError("gain matrix size differs from the number of candidates");
  const auto grid = opt.grid.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (!same_gain(cands[i].gains[j], gamma(i, j), grid))
        throw Error("gain gamma_" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                    " of the candidate differs from the gain matrix");

  const auto sg = gain::small_gain_check(gamma, opt.small_gain);
  if (!sg.holds()) throw Error("small-gain condition " + gain::to_string(sg.status) + "; no composite certificate");

  CompositeCertificate c;
  c.parts = cands;
  c.sigma = gain::build_omega_path(gamma, anchor, opt.grid);
  c.phi = gain::compose_phi(c.sigma, gamma);
  for (const auto& s : c.sigma.sigma) c.sigma_inverse.push_back(kfun::inverse(s));
  const auto names = hybrid::state_names(net.state_dim());
  for (std::size_t i = 0; i < n; ++i) {
    c.Vi.emplace_back(cands[i].V, names);
    c.offsets.push_back(net.offset(i));
    c.dims.push_back(net.dim(i));
  }

  // gamma = max_j phi^{-1} o gamma_j
  const KFun phi_inv = kfun::inverse(c.phi);
  std::vector<KFun> gs;
  for (const auto& cand : cands)
    if (!cand.input_gain.is_zero()) gs.push_back(kfun::compose(phi_inv, cand.input_gain));
  c.gamma = gs.empty() ? KFun::zero() : kfun::pointwise_max(gs);

  // lambda = max{sigma_i^{-1} o gamma_ij o sigma_j, sigma_i^{-1} o lambda_i o sigma_i}
  std::vector<KFun> ls;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && gamma.has_edge(i, j))
        ls.push_back(kfun::compose({c.sigma_inverse[i], gamma(i, j), c.sigma.sigma[j]}));
    if (!cands[i].lambda.is_zero())
      ls.push_back(kfun::compose({c.sigma_inverse[i], cands[i].lambda, c.sigma.sigma[i]}));
  }
  c.lambda = ls.empty() ? KFun::zero() : kfun::pointwise_max(ls);
  for (double t : grid) {
    if (!(c.lambda(t) < t)) {
      std::ostringstream msg;
      msg << "lambda(t) < t fails at t = " << t << " (lambda = " << c.lambda(t) << ")";
      throw Error(msg.str());
    }
  }

  // Max-norm bounds: c1 = c2 = 1.
  std::vector<KFun> lo, hi;
  for (std::size_t i = 0; i < n; ++i) {
    lo.push_back(kfun::compose(c.sigma_inverse[i], cands[i].psi1));
    hi.push_back(kfun::compose(c.sigma_inverse[i], cands[i].psi2));
  }
  c.psi1 = kfun::pointwise_min(lo);
  c.psi2 = kfun::pointwise_max(hi);
  for (double t : grid)
    if (c.psi1(t) > c.psi2(t) * (1 + 1e-12)) throw Error("psi1 exceeds psi2 on the grid");

  // alpha(t) = min_i alpha_i(sigma_i(t)) / sigma_i'(t); the slope of sigma_i
  // converts the decay of V_i into decay of sigma_i^{-1}(V_i).
  std::vector<std::optional<double>> slopes;
  for (const auto& s : c.sigma.sigma) slopes.push_back(s.linear_slope());
  auto sig = c.sigma.sigma;
  std::vector<KFun> alphas;
  for (const auto& cand : cands) alphas.push_back(cand.alpha);
  c.alpha = KFun::custom(
      [sig, slopes, alphas](double t) {
        if (t <= 0) return 0.0;
        double a = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < sig.size(); ++i) {
          const double slope = slopes[i] ? *slopes[i] : upper_slope(sig[i], t);
          a = std::min(a, alphas[i](sig[i](t)) / slope);
        }
        return a;
      },
      "min_i alpha_i(sigma_i(t)) / sigma_i'(t)");
  return c;
}

std::vector<std::size_t> active_set(const std::vector<double>& x, const CompositeCertificate& cert) {
  const std::size_t n = cert.size();
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = cert.scaled(i, x);
  const double top = *std::max_element(w.begin(), w.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i)
    if (top == 0.0 || w[i] >= top - kActiveTolerance) out.push_back(i);
  return out;
}

namespace {

void require_equal_jump_sets(const hybrid::NetworkSpec& net) {
  if (!net.jump_sets_equal())
    throw Error("composite verification requires a common jump set D_i = D for all subsystems");
}

std::vector<Surface> tie_surfaces(const CompositeCertificate& cert) {
  std::vector<Surface> out;
  for (std::size_t i = 0; i < cert.size(); ++i)
    for (std::size_t j = 0; j < cert.size(); ++j)
      if (i != j)
        out.push_back({[&cert, i, j](const SamplePoint& p) { return cert.scaled(j, p.x) - cert.scaled(i, p.x); },
                       block_indices(cert.offsets[j], cert.dims[j])});
  return out;
}

}  // namespace

VerificationReport verify_composite_sandwich(const CompositeCertificate& cert, const hybrid::NetworkSpec& net,
                                             const SamplerSpec& sampler) {
  VerificationReport report;
  report.subject = "composite";
  ConditionRecorder rec("sandwich");
  for (const auto& p : draw_samples(sampler, net.state_dim(), net.input_dim(), tie_surfaces(cert))) {
    const double r = hybrid::max_norm(p.x), v = cert.V(p.x);
    const double tol = kJumpRelTolerance * std::max(1.0, v) + 1e-15;
    rec.add(p, cert.psi1(r), v, tol);
    rec.add(p, v, cert.psi2(r), tol);
  }
  report.conditions.push_back(rec.finish("no samples"));
  return report;
}

VerificationReport verify_composite_flow(const CompositeCertificate& cert, const hybrid::NetworkSpec& net,
                                         const SamplerSpec& sampler) {
  require_equal_jump_sets(net);
  const std::size_t N = net.state_dim(), M = net.input_dim();
  auto surfaces = tie_surfaces(cert);
  surfaces.push_back({[&](const SamplePoint& p) { return net.flow_guard(p.x, p.u); }, all_indices(N)});
  if (!cert.gamma.is_zero() && M > 0 && sampler.input_radius > 0)
    surfaces.push_back({[&](const SamplePoint& p) { return cert.V(p.x) - cert.gamma(input_norm(p.u)); },
                        all_indices(N)});

  const auto pieces = cert.pieces();
  VerificationReport report;
  report.subject = "composite";
  ConditionRecorder rec("flow");
  for (const auto& p : draw_samples(sampler, N, M, surfaces)) {
    if (!(net.flow_guard(p.x, p.u) <= 0)) continue;
    const double v = cert.V(p.x);
    if (!cert.gamma.is_zero() && !(v >= cert.gamma(input_norm(p.u)))) continue;
    const double d = clarke_directional_bound(pieces, p.x, net.flow(p.x, p.u));
    rec.add(p, d, -cert.alpha(v), kFlowTolerance);
    if (v > 1e-9) rec.empirical_min(-d / v);
  }
  report.conditions.push_back(rec.finish("sampler produced no points of C with V(x) >= gamma(|u|)"));
  return report;
}

VerificationReport verify_composite_jump(const CompositeCertificate& cert, const hybrid::NetworkSpec& net,
                                         const SamplerSpec& sampler) {
  require_equal_jump_sets(net);
  const std::size_t N = net.state_dim(), M = net.input_dim();
  auto surfaces = tie_surfaces(cert);
  surfaces.push_back({[&](const SamplePoint& p) { return net.jump_guard(p.x, p.u); }, all_indices(N)});

  VerificationReport report;
  report.subject = "composite";
  ConditionRecorder rec("jump");
  for (const auto& p : draw_samples(sampler, N, M, surfaces)) {
    if (!(net.jump_guard(p.x, p.u) <= 0)) continue;
    const double v = cert.V(p.x);
    const double lhs = cert.V(net.jump(p.x, p.u));
    const double rhs = std::max(cert.lambda.is_zero() ? 0.0 : cert.lambda(v),
                                cert.gamma.is_zero() ? 0.0 : cert.gamma(input_norm(p.u)));
    rec.add(p, lhs, rhs, kJumpRelTolerance * std::max(std::abs(rhs), 1e-6));
    if (v > 1e-9) rec.empirical_min(lhs / v);
  }
  report.conditions.push_back(rec.finish("sampler produced no points of D"));
  return report;
}

}  // namespace hsgt::lyapunov
