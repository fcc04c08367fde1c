#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

namespace hsgt {

/// First-order forward-mode value: v + d*eps. `kink` records that some
/// nonsmooth primitive (abs at 0, a tie in min/max, an infinite slope) was hit
/// while propagating, so `d` is only the one-sided derivative along the seed
/// direction and callers wanting a generalized gradient must look elsewhere.
struct Jet {
  double v = 0.0;
  double d = 0.0;
  bool kink = false;

  static Jet constant(double v) { return {v, 0.0, false}; }
  static Jet variable(double v, double d) { return {v, d, false}; }
};

inline Jet operator+(const Jet& a, const Jet& b) { return {a.v + b.v, a.d + b.d, a.kink || b.kink}; }
inline Jet operator-(const Jet& a, const Jet& b) { return {a.v - b.v, a.d - b.d, a.kink || b.kink}; }
inline Jet operator-(const Jet& a) { return {-a.v, -a.d, a.kink}; }
inline Jet operator*(const Jet& a, const Jet& b) {
  return {a.v * b.v, a.d * b.v + a.v * b.d, a.kink || b.kink};
}
inline Jet operator/(const Jet& a, const Jet& b) {
  return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v), a.kink || b.kink};
}

/// Relative tolerance under which two branches of a min/max count as tied.
inline constexpr double kTieTolerance = 1e-12;

inline bool tied(double a, double b) {
  return std::abs(a - b) <= kTieTolerance * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace hsgt
