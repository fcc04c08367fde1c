#pragma once

// Project configuration files and the command-line front end.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hsgt/equiv.hpp"
#include "hsgt/error.hpp"
#include "hsgt/gain_network.hpp"
#include "hsgt/hybrid.hpp"
#include "hsgt/lyapunov.hpp"
#include "hsgt/traj_verify.hpp"

namespace hsgt::cli {

using kfun::KFun;

/// Invalid or inconsistent configuration. The message starts with the JSON
/// path of the offending entry.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct SimulationConfig {
  std::vector<double> x0;
  hybrid::InputSignal input;
  double horizon = 1.0;
  std::size_t max_jumps = 10;
};

struct TrajectoryConfig {
  /// Any of "iss", "pre_gs", "ag".
  std::vector<std::string> properties;
  std::vector<std::vector<double>> initial_conditions;
  /// Constant inputs with every component equal to the level.
  std::vector<double> input_levels;
  double horizon = 30.0;
  std::size_t max_jumps = 100;
  double tail_fraction = traj::kDefaultTailFraction;
  std::vector<traj::SubsystemEstimate> estimates;
  std::optional<traj::CompositeEstimate> composite;
  /// Optional empirical gain table, compared with psi1^{-1} o gamma of the
  /// composite certificate when candidates are configured.
  std::vector<double> gain_levels;
  /// Optional zero-input pre-stability search.
  std::vector<double> delta_grid, epsilon_grid;
};

struct ProjectConfig {
  hybrid::NetworkSpec network;
  /// Internal gains; absent when the config has no gains section.
  std::optional<gain::GainMatrix> gains;
  std::vector<KFun> external_gains;
  /// Lyapunov candidates with gains filled in from the gains section.
  std::vector<lyapunov::SubsystemLyapunov> candidates;
  std::vector<double> anchor;
  std::uint64_t seed = 1;
  kfun::Grid grid = kfun::Grid::standard();
  gain::SmallGainOptions small_gain;
  lyapunov::SamplerSpec sampler;
  equiv::EquivOptions equiv;
  hybrid::SimOptions sim;
  std::optional<SimulationConfig> simulation;
  std::optional<TrajectoryConfig> trajectories;
};

/// Parses a configuration from JSON text. Throws ConfigError.
ProjectConfig parse_config(const std::string& json_text);
/// Reads and parses a file. Throws ConfigError.
ProjectConfig load_config(const std::string& path);

/// Applies a seed to every randomized analysis of the config.
void apply_seed(ProjectConfig& cfg, std::uint64_t seed);

inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the hsgt tool. Reports go to `out` (or the --out file),
/// diagnostics to `err`. Returns the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hsgt::cli
