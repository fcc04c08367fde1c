#pragma once

// Monotone scalar functions on [0, inf) and the algebra of comparison
// functions built from them: composition, inversion, pointwise max/min.
// A KFun is an immutable handle to a shared evaluation tree; copies are cheap
// and evaluation is safe from several threads at once.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hsgt/expr.hpp"
#include "hsgt/jet.hpp"

namespace hsgt::kfun {

enum class FunctionClass {
  Zero,              // the distinguished identically-zero gain
  NotK,              // f(0) != 0 or f not positive on the grid
  PositiveDefinite,  // f(0) = 0, f > 0, monotonicity refuted or unchecked
  ClassK,            // strictly increasing on the grid, bounded by the probe
  ClassKInfinity,    // class K and exceeds the unboundedness threshold
  Unverified,        // sampling hit a domain error
};

std::string to_string(FunctionClass c);

/// Log-spaced sample points lo, ..., hi (inclusive).
struct Grid {
  double lo = 1e-6;
  double hi = 1e6;
  std::size_t points = 129;

  std::vector<double> values() const;
  static Grid standard() { return {}; }
};

struct Classification {
  FunctionClass cls = FunctionClass::Unverified;
  Grid grid;
  /// Largest value seen on the grid and the unboundedness probe.
  double sampled_sup = 0.0;
  std::string reason;
};

/// Both thresholds of the sampled unboundedness heuristic.
inline constexpr double kUnboundedProbeMax = 1e12;
inline constexpr double kUnboundedThreshold = 1e9;
inline constexpr double kZeroTolerance = 1e-12;

class KFun {
 public:
  struct Node;

  /// The zero function.
  KFun();

  static KFun zero();
  static KFun from_expr(const expr::Expr& e, const std::string& var = "s");
  /// Parses `text` as an expression in `var`; "0" yields the zero function.
  static KFun parse(std::string_view text, const std::string& var = "s");
  static KFun linear(double slope);
  static KFun identity() { return linear(1.0); }
  /// Piecewise-linear interpolant through (0,0) and the given nodes; beyond
  /// the last node it continues with the slope of the last segment.
  static KFun table(std::vector<double> xs, std::vector<double> ys, std::string description);
  /// Arbitrary callable. Without `jet`, derivatives come from central
  /// differences and are flagged as kinks.
  static KFun custom(std::function<double(double)> value, std::string description,
                     std::function<Jet(double)> jet = {});

  double operator()(double s) const;
  /// Value and derivative with respect to s.
  Jet jet(double s) const;

  bool is_zero() const;
  std::string describe() const;
  /// Classification on the standard grid, computed on first use.
  const Classification& classification() const;

  /// Slope c if f(s) = c*s on the standard grid (relative 1e-12), else empty.
  std::optional<double> linear_slope() const;

  const std::shared_ptr<const Node>& node() const { return node_; }

 private:
  explicit KFun(std::shared_ptr<const Node> node);
  std::shared_ptr<const Node> node_;
  friend KFun compose(const KFun&, const KFun&);
  friend KFun inverse(const KFun&);
  friend KFun pointwise_max(const std::vector<KFun>&);
  friend KFun pointwise_min(const std::vector<KFun>&);
};

/// Strongest class consistent with sampled checks on `grid` (at least 64
/// points spanning [1e-6, 1e6]) plus the unboundedness probe up to 1e12.
/// Domain errors propagate.
Classification classify(const KFun& f, const Grid& grid = Grid::standard());

/// (f o g)(s) = f(g(s)). A zero operand short-circuits to zero.
KFun compose(const KFun& f, const KFun& g);
KFun compose(std::initializer_list<KFun> chain);

/// r with f(r) = y, found by bracketing and bisection to full precision.
/// Throws RangeError when y exceeds the range of f or no bracket exists below
/// 1e12.
double invert(const KFun& f, double y, std::optional<double> bracket_hint = std::nullopt);

/// The inverse function as a KFun; each evaluation calls invert().
KFun inverse(const KFun& f);

KFun pointwise_max(const std::vector<KFun>& fs);
KFun pointwise_min(const std::vector<KFun>& fs);

/// Largest violation of f <= g over the grid values: max(f(r) - g(r)).
double max_excess(const KFun& f, const KFun& g, const std::vector<double>& points);

}  // namespace hsgt::kfun
