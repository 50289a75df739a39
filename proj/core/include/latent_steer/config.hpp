#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "latent_steer/algorithms.hpp"
#include "latent_steer/environment.hpp"
#include "latent_steer/oracle.hpp"

namespace latent_steer {

inline constexpr int kConfigVersion = 1;

struct OracleConfig {
  std::string kind = "synthetic";  // "synthetic" | "remote"
  // synthetic
  std::uint64_t seed = 7;  // draws the orthonormal (k_age, u) pair
  double a = 3.0;
  double b = 30.0;
  double gamma = 0.75;
  double age_min = 0.0;
  double age_max = 100.0;
  // remote
  std::string endpoint;
  double timeout_s = 30.0;
};

struct EvalConfig {
  int episodes = 300;
  std::uint64_t seed = 1'000'003;
  double linear_step_size = 0.25;
  int linear_n_steps = 60;
  std::string centroid_split = "extreme_buckets";  // or "midpoint"
  int cluster_size = 32;
  std::string action_mode = "stochastic";  // or "mean"
  int bootstrap_resamples = 2000;
  int hyperplane_samples = 1000;
};

struct RunConfig {
  int config_version = kConfigVersion;
  std::string profile;
  std::string run_name = "run";
  std::string output_dir = "runs";
  EnvConfig env;
  /// Explicit hyperplane; when absent the synthetic oracle's entangled
  /// direction is used.
  std::optional<Vector> k_hyp;
  OracleConfig oracle;
  TrainConfig train;
  EvalConfig eval;
};

/// Names of the profiles compiled into the library.
std::vector<std::string> builtin_profiles();
/// Raw JSON layer of a built-in profile. Throws ConfigError for unknown names.
nlohmann::json builtin_profile(const std::string& name);

/// Fully populated default tree; it also defines the set of accepted keys.
nlohmann::json default_config_json();

struct ConfigSources {
  std::optional<std::string> profile;               // overrides the file's "profile" key
  std::optional<std::filesystem::path> file;
  std::vector<std::string> overrides;               // "dotted.key=value", value parsed as JSON if possible
  std::optional<std::string> seed_env;              // value of LATENT_STEER_SEED
};

/// defaults ← profile ← file ← seed_env ← overrides, later layers winning.
/// Unknown keys and invalid values are collected and reported together.
RunConfig load_config(const ConfigSources& sources);

/// Parses and validates an already merged tree.
RunConfig config_from_json(const nlohmann::json& j);
/// Fully resolved snapshot (round-trips through config_from_json).
nlohmann::json config_to_json(const RunConfig& cfg);

/// crc32 (hex) of the compact snapshot.
std::string config_hash(const RunConfig& cfg);

/// Oracle plus the environment with its hyperplane resolved.
struct Runtime {
  std::unique_ptr<Oracle> oracle;
  EnvConfig env;
  std::optional<SyntheticOracleSpec> synthetic;
};

Runtime build_runtime(const RunConfig& cfg);

}  // namespace latent_steer
