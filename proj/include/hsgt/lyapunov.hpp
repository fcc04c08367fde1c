#pragma once

// ISS-Lyapunov functions of the subsystems, the composite function
// V(x) = max_i sigma_i^{-1}(V_i(x_i)) and sampled checks of every Lyapunov
// condition, including the nonsmooth flow condition on the active pieces.

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "hsgt/expr.hpp"
#include "hsgt/gain_network.hpp"
#include "hsgt/hybrid.hpp"
#include "hsgt/kfun.hpp"

namespace hsgt::lyapunov {

using kfun::KFun;

/// Candidate for subsystem i. V is written in the global state names
/// x1..xN and may only use the coordinates of its own block.
struct SubsystemLyapunov {
  expr::Expr V;
  KFun psi1, psi2;
  KFun alpha;
  KFun lambda;
  /// gamma_ij for j = 0..n-1; entry i is zero.
  std::vector<KFun> gains;
  KFun input_gain;
};

/// Gain matrix collected from the candidates' internal gains.
gain::GainMatrix gain_matrix(const std::vector<SubsystemLyapunov>& cands);

// ---------------------------------------------------------------------------
// Sampling

struct SamplerSpec {
  std::size_t count = 10000;
  /// States are drawn from [-R, R]^N.
  double state_radius = 2.0;
  /// Inputs are drawn from [-Ru, Ru]^M; 0 samples u = 0 only.
  double input_radius = 0.0;
  std::uint64_t seed = 1;
  /// Share of uniform points; the rest is spread over the surfaces.
  double uniform_fraction = 0.6;
};

struct SamplePoint {
  std::vector<double> x, u;
};

/// Zero set of h reached by scaling the listed state coordinates of a
/// uniform point. Guards and active-set ties are expressed this way.
struct Surface {
  std::function<double(const SamplePoint&)> h;
  std::vector<std::size_t> scaled;
};

/// Uniform points plus points on both sides of each surface, found by
/// bisection of the scale factor. Deterministic for a given seed.
std::vector<SamplePoint> draw_samples(const SamplerSpec& spec, std::size_t state_dim, std::size_t input_dim,
                                      const std::vector<Surface>& surfaces);

// ---------------------------------------------------------------------------
// Reports

enum class Outcome { Pass, Fail, Inconclusive };
std::string to_string(Outcome o);

struct Violation {
  std::vector<double> x, u;
  double measured = 0.0;
  double bound = 0.0;
};

struct ConditionReport {
  std::string id;
  std::size_t tested = 0;
  std::size_t violation_count = 0;
  /// The first few violations, in sample order.
  std::vector<Violation> violations;
  /// min over tested samples of bound - measured.
  double min_margin = std::numeric_limits<double>::infinity();
  /// Condition-specific empirical constant, e.g. the decay rate actually seen.
  double empirical = std::numeric_limits<double>::quiet_NaN();
  Outcome verdict = Outcome::Inconclusive;
  std::string note;
};

struct VerificationReport {
  std::string subject;
  std::vector<ConditionReport> conditions;
  Outcome verdict() const;
};

inline constexpr std::size_t kMaxStoredViolations = 16;

/// Accumulates one ConditionReport sample by sample.
class ConditionRecorder {
 public:
  explicit ConditionRecorder(std::string id) { r_.id = std::move(id); }
  /// bound - measured below -tolerance is a violation; with `strict` a zero
  /// margin is one too.
  void add(const SamplePoint& p, double measured, double bound, double tolerance, bool strict = false);
  void empirical_min(double v);
  /// Inconclusive with `empty_note` when nothing was tested.
  ConditionReport finish(const std::string& empty_note);

 private:
  ConditionReport r_;
};

inline constexpr double kFlowTolerance = 1e-7;
inline constexpr double kJumpRelTolerance = 1e-9;
inline constexpr double kActiveTolerance = 1e-9;
inline constexpr double kDifferenceStep = 1e-6;

// ---------------------------------------------------------------------------
// Generalized directional derivatives

/// One smooth-or-not piece of a max-type function of the state.
struct Piece {
  std::function<double(const std::vector<double>&)> value;
  /// Value and derivative along a direction; kink set where the piece is not
  /// differentiable. May be empty, in which case differences are used.
  std::function<Jet(const std::vector<double>&, const std::vector<double>&)> jet;
};

/// Upper bound for <zeta, direction> over the Clarke gradient of max_k piece_k
/// at x: the largest directional derivative over the pieces attaining the
/// max within kActiveTolerance. Kinked pieces take the largest of forward,
/// backward and central differences with step kDifferenceStep.
double clarke_directional_bound(const std::vector<Piece>& pieces, const std::vector<double>& x,
                                const std::vector<double>& direction);

// ---------------------------------------------------------------------------
// Subsystem checks

/// Sandwich, contraction lambda_i(s) < s, flow condition on C_i under the
/// gain premise and jump condition on D_i for subsystem i.
VerificationReport verify_subsystem(const std::vector<SubsystemLyapunov>& cands, std::size_t i,
                                    const hybrid::NetworkSpec& net, const SamplerSpec& sampler = {});

// ---------------------------------------------------------------------------
// Composite certificate

struct CompositeCertificate {
  gain::OmegaPath sigma;
  std::vector<KFun> sigma_inverse;
  KFun phi, gamma, lambda, psi1, psi2, alpha;
  std::vector<SubsystemLyapunov> parts;
  /// V_i compiled against the full state vector.
  std::vector<expr::CompiledExpr> Vi;
  std::vector<std::size_t> offsets, dims;

  std::size_t size() const { return parts.size(); }
  /// sigma_i^{-1}(V_i(x_i)).
  double scaled(std::size_t i, const std::vector<double>& x) const;
  double V(const std::vector<double>& x) const;
  /// The pieces sigma_i^{-1} o V_i of V.
  std::vector<Piece> pieces() const;
};

struct CompositeOptions {
  kfun::Grid grid = kfun::Grid::standard();
  gain::SmallGainOptions small_gain;
};

/// Builds sigma, phi, gamma, lambda, psi1, psi2 and alpha. Throws Error if the
/// small-gain condition does not hold, the candidates disagree with Gamma or
/// lambda(t) < t fails on the grid.
CompositeCertificate build_composite(const std::vector<SubsystemLyapunov>& cands, const gain::GainMatrix& gamma,
                                     const hybrid::NetworkSpec& net, const std::vector<double>& anchor,
                                     const CompositeOptions& options = {});

/// Indices attaining max_i sigma_i^{-1}(V_i(x_i)) within kActiveTolerance;
/// every index at x = 0.
std::vector<std::size_t> active_set(const std::vector<double>& x, const CompositeCertificate& cert);

VerificationReport verify_composite_sandwich(const CompositeCertificate& cert, const hybrid::NetworkSpec& net,
                                             const SamplerSpec& sampler = {});
/// Requires equal jump sets. Samples (x, u) in C with V(x) >= gamma(|u|).
VerificationReport verify_composite_flow(const CompositeCertificate& cert, const hybrid::NetworkSpec& net,
                                         const SamplerSpec& sampler = {});
/// Requires equal jump sets. Samples (x, u) in D.
VerificationReport verify_composite_jump(const CompositeCertificate& cert, const hybrid::NetworkSpec& net,
                                         const SamplerSpec& sampler = {});

/// Max-norm of the block of subsystem i.
double block_norm(const std::vector<double>& x, std::size_t offset, std::size_t dim);

}  // namespace hsgt::lyapunov
