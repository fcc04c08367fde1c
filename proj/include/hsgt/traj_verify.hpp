#pragma once

// Trajectory-level checks of the stability estimates (ISS, pre-GS, AG and
// 0-input pre-stability) on simulated solution pairs.

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hsgt/hybrid.hpp"
#include "hsgt/kfun.hpp"

namespace hsgt::traj {

using kfun::KFun;

/// beta(r, t, k) = M r exp(-c (t + k)) with M >= 1 and c > 0.
struct Beta {
  double M = 1.0;
  double c = 1.0;
  double operator()(double r, double t, double k) const;
  /// Throws Error unless M >= 1 and c > 0.
  void validate() const;
};

/// Estimate data of one subsystem. `beta` is used by the ISS check, `sigma`
/// by the pre-GS check; the gains by all three.
struct SubsystemEstimate {
  Beta beta;
  KFun sigma;
  /// gamma_ij for j = 0..n-1 (entry i ignored).
  std::vector<KFun> gains;
  KFun input_gain;
};

/// Estimate for the whole state x.
struct CompositeEstimate {
  Beta beta;
  KFun sigma;
  KFun gamma;
};

struct TrajectoryResult {
  std::string label;
  bool pass = true;
  std::size_t checks = 0;
  /// Worst sample: largest lhs / rhs; `subsystem` is npos for the composite
  /// estimate.
  hybrid::HybridTime worst_at{0.0, 0};
  std::size_t subsystem = npos;
  double lhs = 0.0, rhs = 0.0;
  double ratio = 0.0;
  /// AG only: the tail window starts at this value of t + k and holds this
  /// many samples.
  double tail_from = std::numeric_limits<double>::quiet_NaN();
  std::size_t tail_samples = 0;
  std::string note;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

struct BatchResult {
  std::string property;
  std::vector<TrajectoryResult> trajectories;
  bool pass() const;
};

inline constexpr double kRelativeTolerance = 1e-9;
inline constexpr double kAgTolerance = 1e-6;
inline constexpr double kDefaultTailFraction = 0.2;

/// |x_i(t,k)| <= max{beta_i(|x_i0|,t,k), max_j gamma_ij(||x_j||_(t,k)),
/// gamma_i(||u||_(t,k))} at every stored sample; with `composite` also
/// |x(t,k)| <= max{beta(|x0|,t,k), gamma(||u||_(t,k))}.
BatchResult check_iss(const std::vector<hybrid::SolutionPair>& sols, const hybrid::NetworkSpec& net,
                      const std::vector<SubsystemEstimate>& est,
                      const std::optional<CompositeEstimate>& composite = std::nullopt);

/// As check_iss with sigma_i(|x_i0|) in place of the decaying term.
BatchResult check_pre_gs(const std::vector<hybrid::SolutionPair>& sols, const hybrid::NetworkSpec& net,
                         const std::vector<SubsystemEstimate>& est,
                         const std::optional<CompositeEstimate>& composite = std::nullopt);

/// Tail max of |x_i| over the last `tail_fraction` of the domain (in t + k)
/// against max{gamma_ij(||x_j||_inf), gamma_i(||u||_inf)}, absolute tolerance
/// kAgTolerance. Throws Error for an incomplete solution or an empty tail.
BatchResult check_ag(const std::vector<hybrid::SolutionPair>& sols, const hybrid::NetworkSpec& net,
                     const std::vector<SubsystemEstimate>& est,
                     const std::optional<CompositeEstimate>& composite = std::nullopt,
                     double tail_fraction = kDefaultTailFraction);

/// Max of |x| over the tail window of a solution.
double tail_max(const hybrid::SolutionPair& sol, double tail_fraction, double* tail_from = nullptr,
                std::size_t* tail_samples = nullptr);

struct PrestabilityOptions {
  double horizon = 10.0;
  std::size_t max_jumps = 50;
  /// Initial points per delta: the 2N axis points, the 2 diagonal corners
  /// and this many random points on the max-norm sphere.
  std::size_t directions = 32;
  std::uint64_t seed = 1;
  hybrid::SimOptions sim;
};

struct PrestabilityResult {
  std::vector<double> delta_grid;
  /// Largest sup norm reached from |x0| <= delta (running max over the grid).
  std::vector<double> reach;
  std::vector<double> epsilon_grid;
  /// Largest admissible delta per epsilon, if any.
  std::vector<std::optional<double>> delta;
  bool pass() const;
};

/// Throws Error for empty or non-increasing grids.
PrestabilityResult check_zero_input_prestability(const hybrid::NetworkSpec& net, const std::vector<double>& delta_grid,
                                                 const std::vector<double>& epsilon_grid,
                                                 const PrestabilityOptions& options = {});

struct GainTableOptions {
  double horizon = 20.0;
  std::size_t max_jumps = 100;
  double tail_fraction = kDefaultTailFraction;
  /// Initial state; empty means the origin.
  std::vector<double> x0;
  hybrid::SimOptions sim;
};

struct GainTable {
  std::vector<double> levels;
  /// Tail max per level, monotonized by running max.
  std::vector<double> gain;
  std::vector<double> raw;
  /// Levels whose simulation failed, with the reason.
  std::vector<std::string> skipped;
};

/// Constant input with every component equal to the level. Throws Error
/// unless the levels are nonnegative and increasing.
GainTable fit_empirical_gain(const hybrid::NetworkSpec& net, const std::vector<double>& levels,
                             const GainTableOptions& options = {});

/// Runs the simulations concurrently; result i belongs to x0s[i], inputs[i].
std::vector<hybrid::SolutionPair> simulate_batch(const hybrid::NetworkSpec& net,
                                                 const std::vector<std::vector<double>>& x0s,
                                                 const std::vector<hybrid::InputSignal>& inputs, double horizon,
                                                 std::size_t max_jumps, const hybrid::SimOptions& options = {});

}  // namespace hsgt::traj
