#pragma once

// Hybrid time domains and signals, interconnections of hybrid subsystems and
// a deterministic simulator for them.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hsgt/expr.hpp"

namespace hsgt::hybrid {

/// A hybrid time (t, k). Ordering is by t + k.
struct HybridTime {
  double t = 0.0;
  std::size_t k = 0;
  double sum() const { return t + static_cast<double>(k); }
};

inline bool precedes_or_equal(HybridTime a, HybridTime b) { return a.sum() <= b.sum(); }

struct Interval {
  double t_begin = 0.0;
  double t_end = 0.0;
  std::size_t k = 0;
};

class HybridTimeDomain {
 public:
  HybridTimeDomain() = default;
  explicit HybridTimeDomain(std::vector<Interval> intervals);

  const std::vector<Interval>& intervals() const { return intervals_; }
  bool empty() const { return intervals_.empty(); }
  std::size_t jumps() const { return intervals_.empty() ? 0 : intervals_.size() - 1; }
  HybridTime end() const;
  bool contains(HybridTime p) const;
  /// Throws Error unless t starts at 0, endpoints are nondecreasing and k
  /// counts up from 0 in steps of one.
  void validate() const;

 private:
  std::vector<Interval> intervals_;
};

struct Sample {
  double t = 0.0;
  std::size_t k = 0;
  std::vector<double> value;
};

/// Samples in hybrid-time order. A jump at time t is stored as the pair
/// (t, k) and (t, k + 1).
class HybridSignal {
 public:
  explicit HybridSignal(std::size_t dimension = 0) : dim_(dimension) {}

  /// Appends a sample; either k stays and t strictly increases, or k grows by
  /// one and t is unchanged.
  void append(double t, std::size_t k, std::vector<double> value);

  std::size_t dimension() const { return dim_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const std::vector<Sample>& samples() const { return samples_; }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  const Sample& back() const { return samples_.back(); }

  HybridTimeDomain domain() const;
  /// Sample i is the pre-jump point of a jump.
  bool is_pre_jump(std::size_t i) const { return i + 1 < samples_.size() && samples_[i + 1].k != samples_[i].k; }
  bool is_post_jump(std::size_t i) const { return i > 0 && samples_[i - 1].k != samples_[i].k; }

  /// Linear interpolation inside the flow interval containing (t, k).
  std::vector<double> at(HybridTime p) const;

 private:
  std::size_t dim_;
  std::vector<Sample> samples_;
};

double max_norm(const std::vector<double>& v);

/// ||s||_(t,k): max-norm over all samples with (s, l) <= (t, k). This covers
/// both the flow samples and the jump points.
double sup_norm(const HybridSignal& s, HybridTime upto);
/// Running version: entry i is the sup norm up to sample i.
std::vector<double> running_sup_norm(const HybridSignal& s);

/// Values inside the window [from, to] are kept, all others set to zero.
HybridSignal restrict(const HybridSignal& s, HybridTime from, HybridTime to);

/// One subsystem. Expressions use the global state names x1..xN and input
/// names u1..uM. Sets are { guard <= 0 }; an absent flow set means the whole
/// space and an absent jump set means the empty set.
struct SubsystemSpec {
  std::string name;
  std::size_t dim = 1;
  std::vector<expr::Expr> flow;
  std::vector<expr::Expr> jump;
  std::optional<expr::Expr> flow_set;
  std::optional<expr::Expr> jump_set;
};

std::vector<std::string> state_names(std::size_t n);
std::vector<std::string> input_names(std::size_t m);

class NetworkSpec {
 public:
  std::size_t size() const { return subsystems_.size(); }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t offset(std::size_t i) const { return offsets_.at(i); }
  std::size_t dim(std::size_t i) const { return subsystems_.at(i).dim; }
  const SubsystemSpec& subsystem(std::size_t i) const { return subsystems_.at(i); }
  /// x1..xN followed by u1..uM; the slot order of every compiled expression.
  const std::vector<std::string>& variables() const { return variables_; }

  bool jump_sets_equal() const { return jump_sets_equal_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// The stacked flow map (f_1, ..., f_n).
  std::vector<double> flow(const std::vector<double>& x, const std::vector<double>& u) const;
  /// Flow map of subsystem i only.
  std::vector<double> flow(std::size_t i, const std::vector<double>& x, const std::vector<double>& u) const;
  /// Jump map with g_i applied where (x, u) lies in D_i and identity elsewhere.
  std::vector<double> jump(const std::vector<double>& x, const std::vector<double>& u, double tolerance = 0.0) const;
  std::vector<double> jump(std::size_t i, const std::vector<double>& x, const std::vector<double>& u) const;

  /// Guard of C = intersection of the C_i (max of guards, -inf if none).
  double flow_guard(const std::vector<double>& x, const std::vector<double>& u) const;
  /// Guard of D = union of the D_i (min of guards, +inf if none).
  double jump_guard(const std::vector<double>& x, const std::vector<double>& u) const;
  double flow_guard(std::size_t i, const std::vector<double>& x, const std::vector<double>& u) const;
  double jump_guard(std::size_t i, const std::vector<double>& x, const std::vector<double>& u) const;

 private:
  friend NetworkSpec compose_network(std::vector<SubsystemSpec>, std::size_t);

  struct Compiled {
    std::vector<expr::CompiledExpr> flow, jump;
    std::optional<expr::CompiledExpr> flow_set, jump_set;
  };
  std::vector<double> pack(const std::vector<double>& x, const std::vector<double>& u) const;

  std::vector<SubsystemSpec> subsystems_;
  std::vector<Compiled> compiled_;
  std::vector<std::size_t> offsets_;
  std::vector<std::string> variables_;
  std::size_t state_dim_ = 0;
  std::size_t input_dim_ = 0;
  bool jump_sets_equal_ = true;
  std::vector<std::string> warnings_;
};

/// Checks dimensions and variable names and decides whether all D_i agree,
/// structurally or by sampling membership on a fixed box.
NetworkSpec compose_network(std::vector<SubsystemSpec> subsystems, std::size_t input_dim);

/// Parses a subsystem from expression text, resolving against the names of
/// an n-state, m-input network. Empty guard strings mean "absent".
SubsystemSpec parse_subsystem(std::string name, const std::vector<std::string>& flow,
                              const std::vector<std::string>& jump, const std::string& flow_set,
                              const std::string& jump_set, std::size_t state_dim, std::size_t input_dim);

/// u(t, k): constant, expressions in t and k, or a piecewise-constant table.
class InputSignal {
 public:
  static InputSignal zero(std::size_t m);
  static InputSignal constant(std::vector<double> value);
  static InputSignal expressions(std::vector<expr::Expr> components);
  /// value[i] holds on [times[i], times[i+1]); the last value holds onward.
  static InputSignal table(std::vector<double> times, std::vector<std::vector<double>> values);
  static InputSignal custom(std::size_t m, std::function<std::vector<double>(double, std::size_t)> f,
                            std::string description);

  std::size_t dimension() const { return dim_; }
  std::vector<double> operator()(double t, std::size_t k) const { return fn_(t, k); }
  const std::string& describe() const { return description_; }

 private:
  std::size_t dim_ = 0;
  std::function<std::vector<double>(double, std::size_t)> fn_;
  std::string description_;
};

enum class Priority { Jump, Flow };
enum class Termination { HorizonReached, MaxJumps, LeftSets };
std::string to_string(Termination t);

struct SimOptions {
  double step = 1e-3;
  double event_tolerance = 1e-9;
  /// Guards within this distance of zero count as satisfied.
  double guard_tolerance = 1e-12;
  Priority priority = Priority::Jump;
};

struct SolutionPair {
  HybridSignal x;
  HybridSignal u;
  Termination reason = Termination::HorizonReached;
  bool complete() const { return reason != Termination::LeftSets; }
};

/// Flows with fixed-step RK4 while in C, jumps while in D (jump priority by
/// default in C and D). Stops when t reaches `horizon`, when k reaches
/// `max_jumps`, or when the state leaves C and D. Throws Error if the initial
/// point lies outside C and D or the state becomes non-finite.
SolutionPair simulate(const NetworkSpec& net, const std::vector<double>& x0, const InputSignal& u, double horizon,
                      std::size_t max_jumps, const SimOptions& options = {});

/// Columns t, k, x_1..x_N, u_1..u_M, phase. Rows around a jump carry "jump".
void write_csv(std::ostream& out, const SolutionPair& sol);

}  // namespace hsgt::hybrid
