#include "hsgt/equiv.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "hsgt/error.hpp"

namespace hsgt::equiv {

using lyapunov::ConditionRecorder;
using lyapunov::SamplePoint;
using lyapunov::Surface;

KFun majorize_lambda(const KFun& lambda, const kfun::Grid& grid) {
  const auto r = grid.values();
  std::vector<double> rho(r.size());
  double running = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    const double l = lambda(r[k]);
    if (!(l < r[k])) {
      std::ostringstream msg;
      msg << "lambda(s) < s fails at s = " << r[k] << " (lambda = " << l << ")";
      throw Error(msg.str());
    }
    running = std::max(running, l);
    rho[k] = 0.5 * (running + r[k]);
  }
  return KFun::table(r, std::move(rho), "(max_[0,r] lambda + r)/2 on grid");
}

namespace {

std::vector<double> log_levels(double lo, double hi, std::size_t count) {
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double w = count == 1 ? 1.0 : static_cast<double>(k) / static_cast<double>(count - 1);
    out[k] = std::exp(std::log(lo) + w * (std::log(hi) - std::log(lo)));
  }
  out.back() = hi;
  return out;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  return out;
}

// Points with max-norm exactly r: axis points, the diagonal corners and
// random points with one coordinate pinned to +-r.
std::vector<std::vector<double>> sphere_points(std::size_t n, double r, std::size_t count, std::mt19937_64& rng) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < n; ++i)
    for (double s : {-1.0, 1.0}) {
      std::vector<double> x(n, 0.0);
      x[i] = s * r;
      out.push_back(std::move(x));
    }
  out.push_back(std::vector<double>(n, r));
  out.push_back(std::vector<double>(n, -r));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (std::size_t s = 0; s < count; ++s) {
    std::vector<double> x(n);
    for (auto& v : x) v = r * unit(rng);
    x[pick(rng)] = unit(rng) < 0 ? -r : r;
    out.push_back(std::move(x));
  }
  return out;
}

KFun fit_alpha2(const lyapunov::CompositeCertificate& cert, const KFun& rho, std::size_t n, double R,
                const EquivOptions& opt, std::uint64_t seed, std::vector<double>& radii,
                std::vector<double>& minima) {
  if (opt.fit_radii < 2) throw Error("need at least two fit radii");
  radii = log_levels(opt.fit_low * R, R, opt.fit_radii);
  minima.assign(radii.size(), 0.0);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t k = 0; k < radii.size(); ++k) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& x : sphere_points(n, radii[k], opt.sphere_samples, rng)) {
      const double v = cert.V(x);
      m = std::min(m, v - rho(v));
    }
    if (!(m > 0)) {
      std::ostringstream msg;
      msg << "V - rho(V) is not positive on the sphere of radius " << radii[k];
      throw Error(msg.str());
    }
    minima[k] = m;
  }
  // Nondecreasing minorant, shifted one node to the right so that the linear
  // interpolant on [r_k, r_k+1] stays below the minimum seen from r_k on, then
  // tilted slightly to make it strictly increasing.
  const std::size_t K = radii.size();
  std::vector<double> b(minima);
  for (std::size_t k = K - 1; k-- > 0;) b[k] = std::min(b[k], b[k + 1]);
  std::vector<double> a(K);
  a[0] = b[0] * radii[0] / radii[1];
  for (std::size_t k = 1; k < K; ++k) a[k] = b[k - 1];
  for (std::size_t k = 0; k < K; ++k)
    a[k] *= 1.0 - 1e-3 * static_cast<double>(K - 1 - k) / static_cast<double>(K - 1);
  return KFun::table(radii, a, "sphere minima of V - rho(V)");
}

}  // namespace

WFormResult to_w_form(const lyapunov::CompositeCertificate& cert, const hybrid::NetworkSpec& net,
                      const SamplerSpec& sampler, const EquivOptions& opt) {
  if (!net.jump_sets_equal()) throw Error("the threshold form needs a common jump set D_i = D");
  const std::size_t N = net.state_dim(), M = net.input_dim();
  WFormResult out;
  WFormCertificate& w = out.w;
  w.source = std::make_shared<const lyapunov::CompositeCertificate>(cert);
  const auto& c = *w.source;
  w.psi1 = c.psi1;
  w.psi2 = c.psi2;
  w.rho = majorize_lambda(c.lambda, opt.grid);
  w.gamma_bar = c.gamma.is_zero()
                    ? KFun::zero()
                    : kfun::compose({kfun::inverse(c.psi1), kfun::inverse(w.rho), c.gamma});
  w.alpha1 = kfun::compose(c.alpha, c.psi1);
  w.alpha2 = fit_alpha2(c, w.rho, N, sampler.state_radius, opt, sampler.seed, w.fit_radii, w.fit_minima);

  auto below_threshold = [&](const SamplePoint& p) {
    return !w.gamma_bar.is_zero() && hybrid::max_norm(p.x) < w.gamma_bar(hybrid::max_norm(p.u));
  };
  std::vector<Surface> common;
  if (!w.gamma_bar.is_zero() && M > 0 && sampler.input_radius > 0)
    common.push_back({[&](const SamplePoint& p) {
                        return hybrid::max_norm(p.x) - w.gamma_bar(hybrid::max_norm(p.u));
                      },
                      all_indices(N)});

  auto& report = out.report;
  report.subject = "threshold form";
  {
    ConditionRecorder rec("w_sandwich");
    for (const auto& p : lyapunov::draw_samples(sampler, N, M, {})) {
      const double r = hybrid::max_norm(p.x), v = w.W(p.x);
      const double tol = lyapunov::kJumpRelTolerance * std::max(1.0, v) + 1e-15;
      rec.add(p, w.psi1(r), v, tol);
      rec.add(p, v, w.psi2(r), tol);
    }
    report.conditions.push_back(rec.finish("no samples"));
  }
  {
    auto surfaces = common;
    surfaces.push_back({[&](const SamplePoint& p) { return net.flow_guard(p.x, p.u); }, all_indices(N)});
    const auto pieces = c.pieces();
    ConditionRecorder rec("w_flow");
    for (const auto& p : lyapunov::draw_samples(sampler, N, M, surfaces)) {
      if (!(net.flow_guard(p.x, p.u) <= 0) || below_threshold(p)) continue;
      const double d = lyapunov::clarke_directional_bound(pieces, p.x, net.flow(p.x, p.u));
      rec.add(p, d, -w.alpha1(hybrid::max_norm(p.x)), lyapunov::kFlowTolerance);
    }
    report.conditions.push_back(rec.finish("no samples of C above the threshold"));
  }
  {
    auto surfaces = common;
    surfaces.push_back({[&](const SamplePoint& p) { return net.jump_guard(p.x, p.u); }, all_indices(N)});
    ConditionRecorder rec("w_jump");
    for (const auto& p : lyapunov::draw_samples(sampler, N, M, surfaces)) {
      if (!(net.jump_guard(p.x, p.u) <= 0) || below_threshold(p)) continue;
      const double diff = w.W(net.jump(p.x, p.u)) - w.W(p.x);
      rec.add(p, diff, -w.alpha2(hybrid::max_norm(p.x)), lyapunov::kFlowTolerance);
    }
    report.conditions.push_back(rec.finish("no samples of D above the threshold"));
  }
  return out;
}

std::pair<KFun, KFun> contraction_from_decay(const KFun& alpha2, const KFun& psi2, const kfun::Grid& grid) {
  const auto r = grid.values();
  const KFun psi2_inv = kfun::inverse(psi2);
  const std::size_t K = r.size();
  std::vector<double> a(K);
  for (std::size_t k = 0; k < K; ++k) a[k] = std::min(alpha2(psi2_inv(r[k])), 0.5 * r[k]);
  // Largest nondecreasing minorant, then slope at most 1/2 so that id - a
  // stays strictly increasing.
  for (std::size_t k = K - 1; k-- > 0;) a[k] = std::min(a[k], a[k + 1]);
  for (std::size_t k = 1; k < K; ++k) a[k] = std::min(a[k], a[k - 1] + 0.5 * (r[k] - r[k - 1]));
  std::vector<double> l(K);
  for (std::size_t k = 0; k < K; ++k) l[k] = r[k] - a[k];
  return {KFun::table(r, a, "min(alpha2 o psi2^-1, r/2), monotone with slope <= 1/2"),
          KFun::table(r, std::move(l), "id - alpha_tilde")};
}

VFormResult to_v_form(const WFormCertificate& w, const hybrid::NetworkSpec& net, const SamplerSpec& sampler,
                      const EquivOptions& opt) {
  if (!net.jump_sets_equal()) throw Error("the implication form needs a common jump set D_i = D");
  const std::size_t N = net.state_dim(), M = net.input_dim();
  VFormResult out;
  out.gamma = w.gamma_bar.is_zero() ? KFun::zero() : kfun::compose(w.psi2, w.gamma_bar);
  std::tie(out.alpha_tilde, out.lambda) = contraction_from_decay(w.alpha2, w.psi2, opt.grid);

  // gamma_hat(v) = max V(g(x,u)) over sampled (x,u) in D with |u| = v and
  // V(x) <= gamma(v); majorized by a running max plus a small tilt.
  if (!out.gamma.is_zero() && M > 0 && sampler.input_radius > 0 && opt.input_levels > 0) {
    const auto levels = log_levels(opt.input_low * sampler.input_radius, sampler.input_radius, opt.input_levels);
    std::mt19937_64 rng(sampler.seed ^ 0x5bd1e995ULL);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, M - 1);
    const std::size_t per_level = std::max<std::size_t>(1, sampler.count / levels.size());
    std::vector<double> hat(levels.size(), 0.0);
    for (std::size_t k = 0; k < levels.size(); ++k) {
      const double cap = out.gamma(levels[k]);
      for (std::size_t s = 0; s < per_level; ++s) {
        std::vector<double> u(M), x(N);
        for (auto& v : u) v = levels[k] * unit(rng);
        u[pick(rng)] = unit(rng) < 0 ? -levels[k] : levels[k];
        for (auto& v : x) v = sampler.state_radius * unit(rng);
        if (w.W(x) > cap) {
          double lo = 0.0, hi = 1.0;
          for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            std::vector<double> y(x);
            for (auto& v : y) v *= mid;
            (w.W(y) <= cap ? lo : hi) = mid;
          }
          for (auto& v : x) v *= lo;
        }
        if (!(net.jump_guard(x, u) <= 0)) continue;
        hat[k] = std::max(hat[k], w.W(net.jump(x, u)));
      }
    }
    std::vector<double> check(levels.size());
    double running = 0.0;
    for (std::size_t k = 0; k < levels.size(); ++k) {
      running = std::max(running, hat[k]);
      check[k] = running + 1e-6 * levels[k];
    }
    out.gamma_check = KFun::table(levels, std::move(check), "majorant of sampled V(g) on {V(x) <= gamma(|u|)}");
    out.gamma_final = kfun::pointwise_max({out.gamma_check, out.gamma});
  } else {
    out.gamma_check = KFun::zero();
    out.gamma_final = out.gamma;
  }

  auto& report = out.report;
  report.subject = "implication form";
  {
    ConditionRecorder rec("v_lambda");
    const SamplePoint none{{}, {}};
    double prev = 0.0;
    for (double t : opt.grid.values()) {
      const double l = out.lambda(t);
      rec.add(none, l, t, 0.0, true);
      rec.add(none, prev, l, 0.0, true);  // strictly increasing
      prev = l;
    }
    auto c = rec.finish("empty grid");
    if (c.verdict == lyapunov::Outcome::Fail) {
      c.verdict = lyapunov::Outcome::Inconclusive;
      c.note = "id - alpha_tilde is not a contraction of class K on the grid";
    }
    report.conditions.push_back(std::move(c));
  }
  {
    const auto& c = *w.source;
    std::vector<Surface> surfaces{{[&](const SamplePoint& p) { return net.jump_guard(p.x, p.u); }, all_indices(N)}};
    if (!out.gamma_final.is_zero() && M > 0 && sampler.input_radius > 0)
      surfaces.push_back(
          {[&](const SamplePoint& p) { return c.V(p.x) - out.gamma_final(hybrid::max_norm(p.u)); }, all_indices(N)});
    ConditionRecorder rec("v_jump");
    for (const auto& p : lyapunov::draw_samples(sampler, N, M, surfaces)) {
      if (!(net.jump_guard(p.x, p.u) <= 0)) continue;
      const double lhs = c.V(net.jump(p.x, p.u));
      const double rhs = std::max(out.lambda(c.V(p.x)),
                                  out.gamma_final.is_zero() ? 0.0 : out.gamma_final(hybrid::max_norm(p.u)));
      rec.add(p, lhs, rhs, lyapunov::kJumpRelTolerance * std::max(std::abs(rhs), 1e-6));
    }
    report.conditions.push_back(rec.finish("no samples of D"));
  }
  return out;
}

}  // namespace hsgt::equiv
