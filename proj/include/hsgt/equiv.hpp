#pragma once

// Conversions between the implication form of the Lyapunov conditions
// (V(x) >= gamma(|u|) implies decrease; V(g) <= max{lambda(V), gamma(|u|)})
// and the norm-threshold form (|x| >= gamma_bar(|u|) implies decrease by
// alpha_bar(|x|)), each followed by a sampled check of the result.

#include <memory>

#include "hsgt/lyapunov.hpp"

namespace hsgt::equiv {

using kfun::KFun;
using lyapunov::SamplerSpec;
using lyapunov::VerificationReport;

/// rho(r) = (max_{[0,r]} lambda + r) / 2 tabulated on the grid, so that
/// lambda <= rho < id at every grid point. Throws Error if lambda(s) >= s at
/// a grid point.
KFun majorize_lambda(const KFun& lambda, const kfun::Grid& grid = kfun::Grid::standard());

struct WFormCertificate {
  /// W = V of this certificate.
  std::shared_ptr<const lyapunov::CompositeCertificate> source;
  KFun psi1, psi2;
  KFun rho;
  KFun gamma_bar;
  KFun alpha1;
  KFun alpha2;
  /// Radii and sphere minima of V - rho(V) behind alpha2.
  std::vector<double> fit_radii, fit_minima;

  double W(const std::vector<double>& x) const { return source->V(x); }
};

struct WFormResult {
  WFormCertificate w;
  VerificationReport report;
};

struct EquivOptions {
  kfun::Grid grid = kfun::Grid::standard();
  /// Radii for the alpha2 fit span [fit_low * R, R] with R the sampler radius.
  double fit_low = 1e-4;
  std::size_t fit_radii = 41;
  std::size_t sphere_samples = 256;
  /// |u| values used to tabulate gamma_hat.
  std::size_t input_levels = 17;
  double input_low = 1e-3;
};

WFormResult to_w_form(const lyapunov::CompositeCertificate& cert, const hybrid::NetworkSpec& net,
                      const SamplerSpec& sampler = {}, const EquivOptions& options = {});

struct VFormResult {
  /// psi2_bar o gamma_bar.
  KFun gamma;
  /// Monotone majorant of the sampled max of V(g(x,u)) over
  /// {(x,u) in D : V(x) <= gamma(|u|)}; zero when no input levels exist.
  KFun gamma_check;
  /// max{gamma_check, gamma}.
  KFun gamma_final;
  KFun alpha_tilde;
  KFun lambda;
  VerificationReport report;
};

/// alpha_tilde = min(alpha2 o psi2^{-1}, r/2) reduced to a nondecreasing
/// minorant with slope at most 1/2, and lambda = id - alpha_tilde.
VFormResult to_v_form(const WFormCertificate& w, const hybrid::NetworkSpec& net, const SamplerSpec& sampler = {},
                      const EquivOptions& options = {});

/// The alpha_tilde / lambda construction on its own, on the given grid.
std::pair<KFun, KFun> contraction_from_decay(const KFun& alpha2, const KFun& psi2, const kfun::Grid& grid);

}  // namespace hsgt::equiv
