#pragma once

// Interconnection gains: the matrix of gains, the max-type gain operator,
// the small-gain test and the path sigma along which the operator contracts.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hsgt/kfun.hpp"

namespace hsgt::gain {

using kfun::KFun;

class GainMatrix {
 public:
  GainMatrix() = default;
  /// n x n matrix of zero gains.
  explicit GainMatrix(std::size_t n);

  std::size_t size() const { return n_; }
  const KFun& operator()(std::size_t i, std::size_t j) const;
  bool has_edge(std::size_t i, std::size_t j) const { return !(*this)(i, j).is_zero(); }

  /// Sets gamma_ij. Diagonal entries must stay zero; nonzero entries must
  /// classify as class K-infinity.
  void set(std::size_t i, std::size_t j, KFun gain);

 private:
  std::size_t n_ = 0;
  std::vector<KFun> entries_;
};

/// (Gamma_max(s))_i = max_j gamma_ij(s_j).
std::vector<double> gamma_max_apply(const GainMatrix& gamma, std::span<const double> s);
/// Gamma_max applied p times; p = 0 returns s.
std::vector<double> iterate_gamma(const GainMatrix& gamma, std::span<const double> s, std::size_t p);

/// gamma_{c0 c1} o gamma_{c1 c2} o ... o gamma_{c(m-1) c0} evaluated at r.
double cycle_gain(const GainMatrix& gamma, const std::vector<std::size_t>& cycle, double r);

enum class Verdict { Holds, Fails, Inconclusive };
std::string to_string(Verdict v);

struct SmallGainOptions {
  kfun::Grid grid{1e-8, 1e8, 129};
  /// A cycle passes at r when its composed gain is at most (1 - strictness) r.
  double strictness = 1e-9;
  std::size_t random_directions = 1000;
  /// Upper bound on (levels + 1)^n for the structured direction grid.
  std::size_t direction_grid_budget = 4096;
  /// Every k-th grid radius is used by the direct search.
  std::size_t direct_radius_stride = 8;
  std::uint64_t seed = 1;
  std::size_t max_cycle_nodes = 12;
  std::size_t max_cycles = 1'000'000;
};

struct CycleWitness {
  std::vector<std::size_t> cycle;
  double radius = 0.0;
  double composed = 0.0;
};

struct SmallGainVerdict {
  Verdict status = Verdict::Holds;
  bool holds() const { return status == Verdict::Holds; }

  /// s != 0 with Gamma_max(s) >= s, re-verified by evaluation.
  std::optional<std::vector<double>> vector_witness;
  std::optional<CycleWitness> cycle_witness;

  bool cycle_method_ran = false;
  std::size_t cycles_checked = 0;
  /// max over checked cycles and grid radii of gamma_cycle(r) / r.
  double worst_cycle_ratio = 0.0;
  std::optional<CycleWitness> worst_cycle;
  /// Direct search found a witness although every cycle passed. This must
  /// never happen; it indicates a numerical defect.
  bool methods_disagree = false;
  std::string note;
};

SmallGainVerdict small_gain_check(const GainMatrix& gamma, const SmallGainOptions& options = {});

struct OmegaPath {
  std::vector<KFun> sigma;
  std::vector<double> anchor;
  /// Gamma was inflated to (1 + inflation) Gamma when building Q; 0 when the
  /// plain construction already satisfies the strict inequality on the grid.
  double inflation = 0.0;
  /// min over grid r and i of (sigma_i(r) - Gamma_max(sigma(r))_i) / sigma_i(r).
  double min_relative_margin = 0.0;
  kfun::Grid grid;

  std::size_t size() const { return sigma.size(); }
  std::vector<double> operator()(double r) const;
};

/// sigma(r) = Q(a r) with Q_i(s) = max_{0 <= p < n} (Gamma_max^p(s))_i.
/// Throws Error when the strict inequality Gamma_max(sigma(r)) < sigma(r)
/// fails on the grid even after a small inflation of Gamma.
OmegaPath build_omega_path(const GainMatrix& gamma, std::span<const double> anchor,
                           const kfun::Grid& grid = kfun::Grid::standard());

/// phi = min_i sigma_i, after checking max{max_j gamma_ij(sigma_j(r)), phi(r)}
/// <= sigma_i(r) for every i on the path grid.
KFun compose_phi(const OmegaPath& path, const GainMatrix& gamma);

}  // namespace hsgt::gain
